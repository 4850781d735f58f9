"""Suffix array, BWT and FM-index baseline with checkpointed occurrence counts.

The suffix array is built by prefix doubling over numpy ranks. Because the
text ends with a unique sentinel that sorts below every base, suffix order
equals sorted-rotation (BW-matrix) order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from dnasearch.seqcore import Query, Reference

OCC_STRIDE = 64  # checkpoint spacing; one 64-bit occurrence bitmap word per block
NUM_RANKS = 5  # sentinel + ACGT


@dataclass(frozen=True)
class SaInterval:
    """Half-open BW-matrix row range [low, high); empty when low == high."""

    low: int
    high: int

    def __post_init__(self):
        if not 0 <= self.low <= self.high:
            raise ValueError(f"malformed interval [{self.low}, {self.high})")

    @property
    def empty(self) -> bool:
        return self.low == self.high

    def __len__(self) -> int:
        return self.high - self.low


def build_suffix_array(ref: Reference) -> np.ndarray:
    """Prefix-doubling suffix sort; returns sa as uint32, sa[0] == n-1."""
    t = ref.ranks
    n = t.size
    rank = t.astype(np.int64)
    order = np.argsort(rank, kind="stable")
    r_sorted = rank[order]
    new = np.empty(n, dtype=np.int64)
    new[order] = np.cumsum(np.concatenate(([0], (r_sorted[1:] != r_sorted[:-1]).astype(np.int64))))
    rank = new
    k = 1
    while rank.max() != n - 1:
        # rank of suffix i+k; -1 past the end (sentinel makes real ties impossible there)
        rank2 = np.full(n, -1, dtype=np.int64)
        rank2[: n - k] = rank[k:]
        order = np.lexsort((rank2, rank))
        r1 = rank[order]
        r2 = rank2[order]
        changed = np.concatenate(([0], ((r1[1:] != r1[:-1]) | (r2[1:] != r2[:-1])).astype(np.int64)))
        new = np.empty(n, dtype=np.int64)
        new[order] = np.cumsum(changed)
        rank = new
        k *= 2
    sa = np.empty(n, dtype=np.uint32)
    sa[rank] = np.arange(n, dtype=np.uint32)
    return sa


def build_bwt(ref: Reference, sa: np.ndarray) -> np.ndarray:
    """Last column of the BW-matrix, as ranks (sentinel representable)."""
    n = ref.n
    prev = (sa.astype(np.int64) - 1) % n
    return ref.ranks[prev]


def _pack_occ(bwt: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Checkpoint counts at block starts plus per-rank occurrence bitmaps."""
    n = bwt.size
    nblocks = (n + OCC_STRIDE - 1) // OCC_STRIDE
    padded = np.zeros(nblocks * OCC_STRIDE, dtype=np.uint8)
    padded[:n] = bwt
    bits = np.zeros((NUM_RANKS, nblocks), dtype=np.uint64)
    checkpoints = np.zeros((nblocks, NUM_RANKS), dtype=np.uint32)
    weights = (np.uint64(1) << np.arange(OCC_STRIDE, dtype=np.uint64))
    grid = padded.reshape(nblocks, OCC_STRIDE)
    for r in range(NUM_RANKS):
        mask = grid == r
        if r == 0:
            # padding bytes are 0; exclude them from the sentinel bitmap
            valid = np.arange(nblocks * OCC_STRIDE).reshape(nblocks, OCC_STRIDE) < n
            mask = mask & valid
        bits[r] = (mask * weights).sum(axis=1, dtype=np.uint64)
        per_block = mask.sum(axis=1, dtype=np.uint32)
        checkpoints[1:, r] = np.cumsum(per_block, dtype=np.uint32)[:-1]
    return checkpoints, bits


@dataclass(frozen=True)
class FmIndex:
    n: int
    sa: np.ndarray  # uint32, length n
    bwt: np.ndarray  # uint8 ranks, length n
    d: np.ndarray  # int64[NUM_RANKS]: count of ranks smaller than r
    checkpoints: np.ndarray  # uint32[nblocks, NUM_RANKS]
    occ_bits: np.ndarray  # uint64[NUM_RANKS, nblocks]

    def occ(self, rank: int, i: int) -> int:
        """Occurrences of ``rank`` in bwt[0..i]; i == -1 returns 0."""
        if i == -1:
            return 0
        if not -1 <= i < self.n:
            raise IndexError(f"occ position {i} out of range for n={self.n}")
        block, off = divmod(i, OCC_STRIDE)
        mask = np.uint64((1 << (off + 1)) - 1) if off < 63 else np.uint64(0xFFFFFFFFFFFFFFFF)
        inblock = int(np.bitwise_count(self.occ_bits[rank, block] & mask))
        return int(self.checkpoints[block, rank]) + inblock

    def fm_step(self, rank: int, i: int) -> int:
        """Lower-bound row of prepending character ``rank`` at row i."""
        if not 0 <= i <= self.n:
            raise IndexError(f"row {i} out of range for n={self.n}")
        return int(self.d[rank]) + self.occ(rank, i - 1)

    def occ_many(self, ranks: np.ndarray, rows: np.ndarray) -> np.ndarray:
        """Vectorized occ(ranks[j], rows[j]); rows may be -1."""
        rows = rows.astype(np.int64)
        safe = np.maximum(rows, 0)
        block = safe >> 6
        off = (safe & 63).astype(np.uint64)
        mask = np.where(
            off < 63,
            (np.uint64(1) << (off + np.uint64(1))) - np.uint64(1),
            np.uint64(0xFFFFFFFFFFFFFFFF),
        )
        inblock = np.bitwise_count(self.occ_bits[ranks, block] & mask).astype(np.int64)
        out = self.checkpoints[block, ranks].astype(np.int64) + inblock
        return np.where(rows < 0, 0, out)

    def fm_step_many(self, ranks: np.ndarray, rows: np.ndarray) -> np.ndarray:
        return self.d[ranks] + self.occ_many(ranks, rows - 1)


def build_fm_index(ref: Reference, sa: np.ndarray | None = None) -> FmIndex:
    if sa is None:
        sa = build_suffix_array(ref)
    bwt = build_bwt(ref, sa)
    counts = np.bincount(ref.ranks, minlength=NUM_RANKS).astype(np.int64)
    d = np.concatenate(([0], np.cumsum(counts)[:-1]))
    checkpoints, bits = _pack_occ(bwt)
    return FmIndex(n=ref.n, sa=sa, bwt=bwt, d=d, checkpoints=checkpoints, occ_bits=bits)


def backward_search(fm: FmIndex, query: Query | np.ndarray) -> SaInterval:
    """Classic one-character-at-a-time FM-index search."""
    ranks = query.ranks if isinstance(query, Query) else query
    low, high = 0, fm.n
    for c in ranks[::-1]:
        low = fm.fm_step(int(c), low)
        high = fm.fm_step(int(c), high)
        if low >= high:
            return SaInterval(low, low)
    return SaInterval(low, high)


def backward_search_batch(fm: FmIndex, qmatrix: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized backward search over fixed-length queries (rows of ranks)."""
    m, qlen = qmatrix.shape
    low = np.zeros(m, dtype=np.int64)
    high = np.full(m, fm.n, dtype=np.int64)
    for t in range(qlen - 1, -1, -1):
        c = qmatrix[:, t].astype(np.int64)
        low = fm.d[c] + fm.occ_many(c, low - 1)
        high = fm.d[c] + fm.occ_many(c, high - 1)
    # an emptied interval stays empty under fm_step; normalize low==high pairs
    high = np.maximum(high, low)
    return low, high


def locate(fm: FmIndex, interval: SaInterval) -> set[int]:
    """Reference positions of the rows in the interval."""
    return {int(p) for p in fm.sa[interval.low : interval.high]}
