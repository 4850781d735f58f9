"""Shared fixtures and brute-force oracles for the test suite."""

from __future__ import annotations

import numpy as np
import pytest

from dnasearch.seqcore import Reference, encode_ranks
from dnasearch.search import build_engine

RANK_TO_CHAR = "$ACGT"


def make_reference(bases: str, name: str = "test") -> Reference:
    """Reference from an ACGT string (sentinel appended)."""
    ranks = np.append(encode_ranks(bases), 0).astype(np.uint8)
    return Reference(name, ranks)


def random_reference(rng: np.random.Generator, n_bases: int, name: str = "rand") -> Reference:
    ranks = np.append(rng.integers(1, 5, size=n_bases).astype(np.uint8), 0)
    return Reference(name, ranks.astype(np.uint8))


def rotation_rows(ranks) -> list[int]:
    """Row order of the sorted-rotation matrix: rows[r] = start of rank-r rotation."""
    seq = list(ranks)
    n = len(seq)
    return sorted(range(n), key=lambda i: seq[i:] + seq[:i])


def naive_interval(ranks, query) -> tuple[int, int]:
    """Lower/upper bound of a query prefix over sorted rotations (brute force)."""
    seq = list(ranks)
    n = len(seq)
    q = list(query)
    rows = rotation_rows(seq)
    lo = hi = 0
    for start in rows:
        prefix = [seq[(start + j) % n] for j in range(len(q))]
        if prefix < q:
            lo += 1
        if prefix <= q:
            hi += 1
    return lo, hi


def naive_positions(ranks, query) -> set[int]:
    """All start positions of the query in the reference (sentinel excluded)."""
    seq = list(ranks)
    q = list(query)
    if not q:
        return set(range(len(seq)))
    return {
        i
        for i in range(len(seq) - len(q) + 1)
        if seq[i : i + len(q)] == q
    }


@pytest.fixture(scope="session")
def medium_engine():
    """Engine over a seeded random 10^6-base reference, K=21 (shared, slow to build)."""
    rng = np.random.default_rng(20240601)
    ref = random_reference(rng, 1_000_000, name="medium")
    engine = build_engine(ref, k=21)
    return engine, ref
