#!/usr/bin/env python3
"""Authorized-set growth experiment.

Builds the standard synthetic instance (10 authorized, 15 known outliers,
30 outliers, 20 tables of 1 bit), then for each addition size enrolls that
many new transmitters from the outlier pool and reports accuracy, latency
and retraining time. One CSV row per (scheme, addition size).

Typical runs:
    python scripts/run_add_sweep.py --out results/add_sweep.csv
    python scripts/run_add_sweep.py --scheme lsh_dimred_small --seed 7 \
        --out results/add_sweep_small.csv
    python scripts/run_add_sweep.py --all-schemes --out results/add_all.csv
"""

import argparse
import sys
from dataclasses import replace
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from lshauth import bench  # noqa: E402


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--dim", type=int, default=64)
    parser.add_argument("--samples-per-tx", type=int, default=100)
    parser.add_argument("--l-tables", type=int, default=20)
    parser.add_argument("--hash-bits", type=int, default=1)
    parser.add_argument("--add-counts", default="5,10,15,20")
    parser.add_argument("--scheme", choices=bench.SCHEMES, default="lsh")
    parser.add_argument("--all-schemes", action="store_true",
                        help="run every scheme variant on the same instance")
    parser.add_argument("--out", required=True)
    args = parser.parse_args()

    config = bench.ExperimentConfig(
        seed=args.seed, dim=args.dim, samples_per_tx=args.samples_per_tx,
        num_tables=args.l_tables, hash_bits=args.hash_bits,
        add_counts=tuple(int(c) for c in args.add_counts.split(",")),
        scheme=args.scheme)

    schemes = bench.SCHEMES if args.all_schemes else (args.scheme,)
    rows = []
    for scheme in schemes:
        rows.extend(bench.run_add_auth_sweep(replace(config, scheme=scheme)))
        print(f"{scheme}: done")
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    bench.write_csv(rows, bench.ADD_SWEEP_COLUMNS, args.out)
    print(f"wrote {len(rows)} rows to {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
