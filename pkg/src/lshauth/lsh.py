"""Multi-table random-hyperplane hash index with approximate NN search.

Each of the L tables holds K hyperplanes with i.i.d. standard-normal
components. A vector's key in a table is the K-bit sign pattern of its dot
products with that table's hyperplanes (after subtracting an optional center
offset): bit i is 1 when w_i . (v - center) >= 0, with exact zeros mapping
to 1. Hyperplane index 0 occupies the most significant bit, so the canonical
text form of a key reads left to right in hyperplane order.

Candidate retrieval unions the L buckets a query maps to; the exact scan is
then restricted to that union. All hyperplanes are drawn up front from one
PCG64 stream seeded at construction, so two indexes built with the same
(dim, L, K, seed) are identical, and the first L-1 tables of an L-table
index equal the tables of the corresponding (L-1)-table index.

Build and insert require exclusive access; once loading is done the index
is treated as frozen and queries may run concurrently (interleaving inserts
with queries is unsupported and must be serialized by the caller).

Snapshot layout ("idx"):
    magic   8 bytes ASCII "LSHIDX01"
    seed    u64 little-endian
    dim     u32, L u32, K u32 little-endian
    center  dim * f64 little-endian
    size    u32 little-endian, number of indexed records
    tables  L times:
        buckets u32 count of non-empty buckets
        each bucket, in insertion order:
            key      ceil(K/8) bytes: the K-bit string read as a big-endian
                     integer (hyperplane 0 is the string's leftmost bit)
            entries  u32 count, then count * (u32 tx_id, u32 sample_id)
Vectors are not stored; loading resolves (tx_id, sample_id) pairs against a
dataset and verifies each record still hashes into its recorded bucket.
The byte span from the start of the file through `center` is exactly the
hyperplane-defining state: it is untouched by inserts.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .data import Dataset, FingerprintRecord
from .distance import euclidean, gathered_squared_distances, nearest_position
from .errors import (DimensionMismatchError, DuplicateRecordError, ParseError,
                     ValidationError)

MAX_HASH_BITS = 256
INDEX_MAGIC = b"LSHIDX01"

_GROW = 1024  # initial row-store capacity


def pack_bit_rows(bits: np.ndarray, k: int) -> list[int]:
    """Pack an (n, k) boolean array into per-row integers, MSB = column 0."""
    n = bits.shape[0]
    if k == 0:
        return [0] * n
    if k <= 64:
        powers = np.uint64(1) << np.arange(k - 1, -1, -1, dtype=np.uint64)
        return (bits.astype(np.uint64) @ powers).tolist()
    packed = np.packbits(bits, axis=1)
    pad = packed.shape[1] * 8 - k
    return [int.from_bytes(row.tobytes(), "big") >> pad for row in packed]


@dataclass(frozen=True)
class HashKey:
    """A K-bit bucket label; value holds hyperplane 0 at the MSB."""

    value: int
    length: int

    def __post_init__(self):
        if not 0 <= self.length <= MAX_HASH_BITS:
            raise ValidationError(f"key length out of range: {self.length}")
        if not 0 <= self.value < (1 << self.length):
            raise ValidationError(
                f"key value {self.value} does not fit in {self.length} bits")

    @classmethod
    def from_text(cls, text: str) -> "HashKey":
        if text and set(text) - {"0", "1"}:
            raise ValidationError(f"key text must be binary, got {text!r}")
        return cls(int(text, 2) if text else 0, len(text))

    @property
    def text(self) -> str:
        return format(self.value, f"0{self.length}b") if self.length else ""

    def __str__(self) -> str:
        return self.text


class LshTable:
    """One hash table: K hyperplanes plus key -> bucket of row positions."""

    __slots__ = ("planes", "_buckets", "_arrays", "_index")

    def __init__(self, planes: np.ndarray, index: "LshIndex"):
        self.planes = planes  # (K, dim) float64, read-only view
        self._buckets: dict[int, list[int]] = {}
        self._arrays: dict[int, np.ndarray] = {}  # cache of bucket position arrays
        self._index = index

    def _append(self, key_value: int, row: int) -> None:
        self._buckets.setdefault(key_value, []).append(row)
        self._arrays.pop(key_value, None)

    def _bucket_array(self, key_value: int) -> Optional[np.ndarray]:
        arr = self._arrays.get(key_value)
        if arr is None:
            rows = self._buckets.get(key_value)
            if rows is None:
                return None
            arr = np.asarray(rows, dtype=np.intp)
            self._arrays[key_value] = arr
        return arr

    @property
    def hash_bits(self) -> int:
        return self.planes.shape[0]

    def hash_key(self, vector, center=None) -> HashKey:
        """Key for a single vector: sign bits of hyperplane dot products."""
        v = np.asarray(vector, dtype=np.float64).reshape(-1)
        if v.shape[0] != self.planes.shape[1]:
            raise DimensionMismatchError(
                f"vector has dim {v.shape[0]}, table expects {self.planes.shape[1]}")
        if not np.all(np.isfinite(v)):
            raise ValidationError("query vector has non-finite components")
        if center is not None:
            v = v - np.asarray(center, dtype=np.float64)
        k = self.hash_bits
        if k == 0:
            return HashKey(0, 0)
        bits = (self.planes @ v) >= 0.0
        return HashKey(pack_bit_rows(bits.reshape(1, -1), k)[0], k)

    def keys(self) -> list[HashKey]:
        k = self.hash_bits
        return [HashKey(v, k) for v in self._buckets]

    def bucket(self, key: HashKey) -> list[FingerprintRecord]:
        rows = self._buckets.get(key.value, [])
        return [self._index._record_at(r) for r in rows]

    def bucket_sizes(self) -> dict[int, int]:
        return {k: len(v) for k, v in self._buckets.items()}


@dataclass
class TableStats:
    nonempty_buckets: int
    occupancy_histogram: dict[int, int]  # bucket size -> number of buckets
    max_occupancy: int
    mean_occupancy: float  # over non-empty buckets
    empty_fraction: float  # of all 2^K possible keys


@dataclass
class BucketStats:
    size: int
    hash_bits: int
    per_table: list[TableStats] = field(default_factory=list)


class LshIndex:
    """L independent hash tables over one shared record store."""

    def __init__(self, dim: int, num_tables: int, hash_bits: int, seed: int,
                 center=None):
        if dim < 1:
            raise ValidationError(f"dim must be >= 1, got {dim}")
        if num_tables < 1:
            raise ValidationError(f"num_tables must be >= 1, got {num_tables}")
        if hash_bits < 0:
            raise ValidationError(f"hash_bits must be >= 0, got {hash_bits}")
        if hash_bits > MAX_HASH_BITS:
            raise ValidationError(
                f"hash_bits above {MAX_HASH_BITS} is unsupported, got {hash_bits}")
        if not 0 <= seed < 2**64:
            raise ValidationError(f"seed out of u64 range: {seed}")
        self.dim = int(dim)
        self.num_tables = int(num_tables)
        self.hash_bits = int(hash_bits)
        self.seed = int(seed)
        if center is None:
            self.center = np.zeros(dim, dtype=np.float64)
        else:
            self.center = np.asarray(center, dtype=np.float64).reshape(-1).copy()
            if self.center.shape[0] != dim:
                raise DimensionMismatchError(
                    f"center has dim {self.center.shape[0]}, expected {dim}")
            if not np.all(np.isfinite(self.center)):
                raise ValidationError("center has non-finite components")
        self.center.flags.writeable = False

        rng = np.random.Generator(np.random.PCG64(self.seed))
        planes = rng.standard_normal((num_tables, hash_bits, dim))
        planes.flags.writeable = False
        self.hyperplanes = planes  # (L, K, dim)
        self._planes_2d = planes.reshape(num_tables * hash_bits, dim)
        self.tables = [LshTable(planes[t], self) for t in range(num_tables)]

        cap = _GROW
        self._matrix = np.empty((cap, dim), dtype=np.float64)
        self._tx = np.empty(cap, dtype=np.uint32)
        self._sm = np.empty(cap, dtype=np.uint32)
        self._n = 0
        self._ids: set[int] = set()
        # scratch for distance math, grown on demand; see _workspace
        self._diff_buf = np.empty((_GROW, dim), dtype=np.float64)
        self._sq_buf = np.empty(_GROW, dtype=np.float64)

    # -- record store -------------------------------------------------------

    @property
    def size(self) -> int:
        return self._n

    def __len__(self) -> int:
        return self._n

    def _ensure_capacity(self, extra: int) -> None:
        need = self._n + extra
        cap = self._matrix.shape[0]
        if need <= cap:
            return
        while cap < need:
            cap *= 2
        mat = np.empty((cap, self.dim), dtype=np.float64)
        mat[:self._n] = self._matrix[:self._n]
        tx = np.empty(cap, dtype=np.uint32)
        tx[:self._n] = self._tx[:self._n]
        sm = np.empty(cap, dtype=np.uint32)
        sm[:self._n] = self._sm[:self._n]
        self._matrix, self._tx, self._sm = mat, tx, sm

    def _workspace(self, rows: int) -> tuple[np.ndarray, np.ndarray]:
        """Scratch buffers with at least `rows` rows (contents undefined)."""
        if self._diff_buf.shape[0] < rows:
            cap = self._diff_buf.shape[0]
            while cap < rows:
                cap *= 2
            self._diff_buf = np.empty((cap, self.dim), dtype=np.float64)
            self._sq_buf = np.empty(cap, dtype=np.float64)
        return self._diff_buf, self._sq_buf

    def reserve(self, additional: int) -> None:
        """Preallocate room for `additional` more records.

        Optional; inserts grow capacity on demand. Reserving up front keeps
        a large bulk load from paying reallocation inside a timed region.
        """
        if additional < 0:
            raise ValidationError(f"additional must be >= 0, got {additional}")
        self._ensure_capacity(additional)

    def _record_at(self, row: int) -> FingerprintRecord:
        return FingerprintRecord(
            int(self._tx[row]), int(self._sm[row]),
            self._matrix[row].astype(np.float32))

    def indexed_dataset(self) -> Dataset:
        """The indexed records as a dataset, in insertion order."""
        return Dataset(self.dim, self._tx[:self._n].copy(),
                       self._sm[:self._n].copy(),
                       self._matrix[:self._n].astype(np.float32))

    # -- hashing ------------------------------------------------------------

    def _keys_for_rows(self, matrix_f64: np.ndarray) -> list[list[int]]:
        """Per-table key values for each row of an (n, dim) float64 matrix."""
        n = matrix_f64.shape[0]
        k = self.hash_bits
        if k == 0:
            zeros = [0] * n
            return [zeros[:] for _ in range(self.num_tables)]
        proj = (matrix_f64 - self.center) @ self._planes_2d.T  # (n, L*K)
        bits = proj >= 0.0
        return [pack_bit_rows(bits[:, t * k:(t + 1) * k], k)
                for t in range(self.num_tables)]

    def _fill_buckets_grouped(self, table: "LshTable", vals: np.ndarray,
                              start: int) -> None:
        """Append `start + i -> vals[i]` bucket entries in one grouped pass.

        Produces the same bucket contents, entry order, and bucket creation
        order as appending row by row (groups are stable-sorted and then
        replayed in first-occurrence order).
        """
        order = np.argsort(vals, kind="stable")
        sorted_vals = vals[order]
        cuts = np.flatnonzero(np.diff(sorted_vals)) + 1
        groups = np.split(order, cuts)
        firsts = np.asarray([g[0] for g in groups])
        for g_i in np.argsort(firsts, kind="stable"):
            group = groups[g_i]
            key = int(vals[group[0]])
            bucket = table._buckets.setdefault(key, [])
            bucket.extend((start + group).tolist())
            table._arrays.pop(key, None)

    def key_for(self, vector, table: int = 0) -> HashKey:
        return self.tables[table].hash_key(vector, self.center)

    # -- insertion ----------------------------------------------------------

    def insert(self, record: FingerprintRecord) -> None:
        """Place one record into its bucket in every table."""
        if record.dim != self.dim:
            raise DimensionMismatchError(
                f"record dim {record.dim} does not match index dim {self.dim}")
        key = (record.tx_id << 32) | record.sample_id
        if key in self._ids:
            raise DuplicateRecordError(
                f"(tx {record.tx_id}, sample {record.sample_id}) already indexed")
        v64 = record.vector.astype(np.float64).reshape(1, -1)
        keys = self._keys_for_rows(v64)
        self._ensure_capacity(1)
        row = self._n
        self._matrix[row] = v64[0]
        self._tx[row] = record.tx_id
        self._sm[row] = record.sample_id
        self._n += 1
        self._ids.add(key)
        for t in range(self.num_tables):
            self.tables[t]._append(keys[t][0], row)

    def insert_dataset(self, data: Dataset) -> None:
        """Bulk insert, equivalent to insert() in dataset order.

        Validates every id against the index (and the batch itself, via the
        dataset's own uniqueness invariant) before touching any state, so a
        duplicate leaves the index unchanged. Rows are hashed in fixed-size
        chunks staged through the index workspaces, keeping per-call
        temporaries bounded no matter how large the batch is.
        """
        if data.dim != self.dim:
            raise DimensionMismatchError(
                f"dataset dim {data.dim} does not match index dim {self.dim}")
        n = len(data)
        if n == 0:
            return
        batch = ((data.tx_ids.astype(np.uint64) << np.uint64(32))
                 | data.sample_ids.astype(np.uint64)).tolist()
        for key in batch:
            if key in self._ids:
                raise DuplicateRecordError(
                    f"(tx {key >> 32}, sample {key & 0xFFFFFFFF}) already indexed")
        self._ensure_capacity(n)
        start = self._n
        self._matrix[start:start + n] = data.matrix  # exact f32 -> f64 upcast
        self._tx[start:start + n] = data.tx_ids
        self._sm[start:start + n] = data.sample_ids
        self._n += n
        self._ids.update(batch)

        k = self.hash_bits
        if k == 0:
            for table in self.tables:
                bucket = table._buckets.setdefault(0, [])
                bucket.extend(range(start, start + n))
                table._arrays.pop(0, None)
            return
        powers = (np.uint64(1) << np.arange(k - 1, -1, -1, dtype=np.uint64)
                  if k <= 64 else None)
        chunk = 4096
        scratch, _ = self._workspace(min(n, chunk))
        for c0 in range(0, n, chunk):
            c1 = min(n, c0 + chunk)
            m = c1 - c0
            diff = np.subtract(self._matrix[start + c0:start + c1],
                               self.center, out=scratch[:m])
            bits = (diff @ self._planes_2d.T) >= 0.0
            for t in range(self.num_tables):
                table = self.tables[t]
                table_bits = bits[:, t * k:(t + 1) * k]
                if powers is not None:
                    self._fill_buckets_grouped(
                        table, table_bits.astype(np.uint64) @ powers,
                        start + c0)
                else:
                    tkeys = pack_bit_rows(table_bits, k)
                    for i in range(m):
                        table._buckets.setdefault(tkeys[i], []) \
                            .append(start + c0 + i)
                    for key in set(tkeys):
                        table._arrays.pop(key, None)

    # -- queries ------------------------------------------------------------

    def _query_vector(self, vector) -> np.ndarray:
        v = np.asarray(vector, dtype=np.float64).reshape(-1)
        if v.shape[0] != self.dim:
            raise DimensionMismatchError(
                f"query dim {v.shape[0]} does not match index dim {self.dim}")
        if not np.all(np.isfinite(v)):
            raise ValidationError("query vector has non-finite components")
        return v

    def _candidate_positions(self, v64: np.ndarray) -> np.ndarray:
        """Union of the query's buckets across tables.

        Order is table index then within-bucket insertion order, first
        occurrence kept on duplicates. The returned array may be shared
        internal state; callers must not modify it.
        """
        k = self.hash_bits
        if k == 0:
            return np.arange(self._n, dtype=np.intp)
        bits = (self._planes_2d @ (v64 - self.center)) >= 0.0
        keys = pack_bit_rows(bits.reshape(self.num_tables, k), k)
        hits = []
        for t in range(self.num_tables):
            arr = self.tables[t]._bucket_array(keys[t])
            if arr is not None:
                hits.append(arr)
        if not hits:
            return np.empty(0, dtype=np.intp)
        if len(hits) == 1:
            return hits[0]
        # keep-first dedup across tables; within a table a record appears once
        taken = np.zeros(self._n, dtype=bool)
        parts = []
        for arr in hits:
            fresh = arr[~taken[arr]]
            if fresh.size:
                parts.append(fresh)
                taken[arr] = True
        return np.concatenate(parts)

    def candidates(self, vector) -> list[FingerprintRecord]:
        v64 = self._query_vector(vector)
        return [self._record_at(r) for r in self._candidate_positions(v64)]

    def candidate_count(self, vector) -> int:
        return int(self._candidate_positions(self._query_vector(vector)).size)

    def ann_search(self, vector) -> Optional[tuple[FingerprintRecord, float]]:
        """Nearest record among the query's bucket union, or None if the
        union is empty. Distance ties break to the smallest (tx, sample)."""
        v64 = self._query_vector(vector)
        pos = self._candidate_positions(v64)
        if pos.size == 0:
            return None
        diff_buf, sq_buf = self._workspace(pos.size)
        sq = gathered_squared_distances(self._matrix, pos, v64, diff_buf,
                                        sq_buf)
        best_i = nearest_position(self._tx[pos], self._sm[pos], sq)
        return self._record_at(int(pos[best_i])), euclidean(float(sq[best_i]))

    def bucket_stats(self) -> BucketStats:
        stats = BucketStats(size=self._n, hash_bits=self.hash_bits)
        total_keys = float(2 ** self.hash_bits)
        for tab in self.tables:
            sizes = [len(b) for b in tab._buckets.values()]
            hist: dict[int, int] = {}
            for s in sizes:
                hist[s] = hist.get(s, 0) + 1
            nonempty = len(sizes)
            stats.per_table.append(TableStats(
                nonempty_buckets=nonempty,
                occupancy_histogram=hist,
                max_occupancy=max(sizes) if sizes else 0,
                mean_occupancy=(self._n / nonempty) if nonempty else 0.0,
                empty_fraction=1.0 - nonempty / total_keys,
            ))
        return stats

    def copy(self) -> "LshIndex":
        """Independent deep copy sharing no mutable state."""
        dup = LshIndex.__new__(LshIndex)
        dup.dim = self.dim
        dup.num_tables = self.num_tables
        dup.hash_bits = self.hash_bits
        dup.seed = self.seed
        dup.center = self.center
        dup.hyperplanes = self.hyperplanes
        dup._planes_2d = self._planes_2d
        dup.tables = [LshTable(self.hyperplanes[t], dup)
                      for t in range(self.num_tables)]
        for t in range(self.num_tables):
            dup.tables[t]._buckets = {k: list(v)
                                      for k, v in self.tables[t]._buckets.items()}
            dup.tables[t]._arrays = {}
        dup._matrix = self._matrix.copy()
        dup._tx = self._tx.copy()
        dup._sm = self._sm.copy()
        dup._n = self._n
        dup._ids = set(self._ids)
        dup._diff_buf = np.empty((_GROW, self.dim), dtype=np.float64)
        dup._sq_buf = np.empty(_GROW, dtype=np.float64)
        return dup


def build_index(dim: int, num_tables: int, hash_bits: int, seed: int,
                center=None) -> LshIndex:
    """Create an empty index; all L*K hyperplanes are drawn from the seed."""
    return LshIndex(dim, num_tables, hash_bits, seed, center)


# -- snapshot io -------------------------------------------------------------

_IDX_FIXED = struct.Struct("<QIII")


def hyperplane_section_length(dim: int) -> int:
    """Bytes from the start of a snapshot that define the hash functions."""
    return 8 + _IDX_FIXED.size + 8 * dim


def save_index(index: LshIndex, path) -> None:
    k = index.hash_bits
    key_bytes = (k + 7) // 8
    with open(path, "wb") as fh:
        fh.write(INDEX_MAGIC)
        fh.write(_IDX_FIXED.pack(index.seed, index.dim, index.num_tables, k))
        fh.write(index.center.astype("<f8").tobytes())
        fh.write(struct.pack("<I", index.size))
        for tab in index.tables:
            fh.write(struct.pack("<I", len(tab._buckets)))
            for key_value, rows in tab._buckets.items():
                fh.write(int(key_value).to_bytes(key_bytes, "big"))
                fh.write(struct.pack("<I", len(rows)))
                ids = np.empty((len(rows), 2), dtype="<u4")
                ids[:, 0] = index._tx[rows]
                ids[:, 1] = index._sm[rows]
                fh.write(ids.tobytes())


def load_index(path, data: Dataset) -> LshIndex:
    """Rebuild an index from a snapshot, resolving vectors from `data`.

    Every stored (tx_id, sample_id) must exist in `data`, and each record is
    re-hashed to confirm it belongs in its recorded bucket; a mismatch means
    the snapshot and dataset do not correspond.
    """
    raw = Path(path).read_bytes()
    if len(raw) < 8 or raw[:8] != INDEX_MAGIC:
        raise ParseError(path, f"bad magic; expected {INDEX_MAGIC!r}", offset=0)
    off = 8
    try:
        seed, dim, num_tables, k = _IDX_FIXED.unpack_from(raw, off)
    except struct.error:
        raise ParseError(path, "truncated header", offset=off) from None
    off += _IDX_FIXED.size
    if dim != data.dim:
        raise ParseError(path, f"snapshot dim {dim} != dataset dim {data.dim}",
                         offset=8)
    center = np.frombuffer(raw, dtype="<f8", count=dim, offset=off).copy()
    off += 8 * dim
    (size,) = struct.unpack_from("<I", raw, off)
    off += 4

    index = LshIndex(dim, num_tables, k, seed, center)
    key_bytes = (k + 7) // 8

    pos_of: dict[int, int] = {}
    for i in range(len(data)):
        pos_of[(int(data.tx_ids[i]) << 32) | int(data.sample_ids[i])] = i
    mat64 = data.matrix_f64()

    # first pass: collect per-table bucket layouts
    layouts: list[list[tuple[int, list[int]]]] = []
    for _t in range(num_tables):
        try:
            (nbuckets,) = struct.unpack_from("<I", raw, off)
            off += 4
            table_layout: list[tuple[int, list[int]]] = []
            for _b in range(nbuckets):
                key_value = int.from_bytes(raw[off:off + key_bytes], "big")
                if len(raw[off:off + key_bytes]) != key_bytes:
                    raise struct.error("truncated key")
                off += key_bytes
                (count,) = struct.unpack_from("<I", raw, off)
                off += 4
                ids = np.frombuffer(raw, dtype="<u4", count=2 * count,
                                    offset=off).reshape(count, 2)
                off += 8 * count
                combined = [(int(t) << 32) | int(s) for t, s in ids]
                table_layout.append((key_value, combined))
            layouts.append(table_layout)
        except struct.error:
            raise ParseError(path, "truncated table section", offset=off) from None
    if off != len(raw):
        raise ParseError(path, f"{len(raw) - off} trailing bytes", offset=off)

    # row store in table-0 traversal order; every table indexes the same set
    order: list[int] = []
    for _key, combined in layouts[0]:
        order.extend(combined)
    if len(order) != size or len(set(order)) != size:
        raise ParseError(path, "table 0 does not cover the stored record set")
    rows = []
    for cid in order:
        if cid not in pos_of:
            raise ParseError(
                path, f"record (tx {cid >> 32}, sample {cid & 0xFFFFFFFF}) "
                      f"not present in the resolving dataset")
        rows.append(pos_of[cid])
    rows = np.asarray(rows, dtype=np.intp)

    index._ensure_capacity(size)
    index._matrix[:size] = mat64[rows]
    index._tx[:size] = data.tx_ids[rows]
    index._sm[:size] = data.sample_ids[rows]
    index._n = size
    index._ids = set(order)

    row_of = {cid: i for i, cid in enumerate(order)}
    expected_keys = index._keys_for_rows(index._matrix[:size])
    for t, table_layout in enumerate(layouts):
        buckets = index.tables[t]._buckets
        seen = 0
        for key_value, combined in table_layout:
            bucket_rows = []
            for cid in combined:
                if cid not in row_of:
                    raise ParseError(
                        path, f"table {t} references unknown record "
                              f"(tx {cid >> 32}, sample {cid & 0xFFFFFFFF})")
                row = row_of[cid]
                if expected_keys[t][row] != key_value:
                    raise ParseError(
                        path, f"record (tx {cid >> 32}, sample "
                              f"{cid & 0xFFFFFFFF}) does not hash to its "
                              f"recorded bucket in table {t}; snapshot and "
                              f"dataset disagree")
                bucket_rows.append(row)
            buckets[key_value] = bucket_rows
            seen += len(bucket_rows)
        if seen != size:
            raise ParseError(path, f"table {t} indexes {seen} records, "
                                   f"expected {size}")
    return index
