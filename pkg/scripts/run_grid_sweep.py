#!/usr/bin/env python3
"""Table-count x hash-size factorial experiment.

For every (L, K) cell a fresh index is built over the training pool, a
fixed number of new transmitters is enrolled, and accuracy / precision /
recall / latency / mean candidate count are reported. The CSV is shaped as
a machine-readable heatmap source (one row per cell).

Typical runs:
    python scripts/run_grid_sweep.py --out results/grid.csv
    python scripts/run_grid_sweep.py --grid-l 1,2,4,8 --grid-k 0,2,4,8,16 \
        --seed 3 --out results/grid_wide.csv
"""

import argparse
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from lshauth import bench  # noqa: E402


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--dim", type=int, default=64)
    parser.add_argument("--samples-per-tx", type=int, default=100)
    parser.add_argument("--grid-l", default="1,2,3,4,5")
    parser.add_argument("--grid-k", default="5,10,15,20,25")
    parser.add_argument("--add-count", type=int, default=5,
                        help="transmitters enrolled in every cell")
    parser.add_argument("--scheme", choices=bench.SCHEMES, default="lsh")
    parser.add_argument("--out", required=True)
    args = parser.parse_args()

    config = bench.ExperimentConfig(
        seed=args.seed, dim=args.dim, samples_per_tx=args.samples_per_tx,
        add_counts=(args.add_count,),
        grid_tables=tuple(int(v) for v in args.grid_l.split(",")),
        grid_bits=tuple(int(v) for v in args.grid_k.split(",")),
        scheme=args.scheme)

    rows = bench.run_grid_sweep(config)
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    bench.write_csv(rows, bench.GRID_COLUMNS, args.out)
    print(f"wrote {len(rows)} rows to {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
