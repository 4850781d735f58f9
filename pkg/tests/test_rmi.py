import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dnasearch.fmindex import build_suffix_array
from dnasearch.ipbwt import build_ipbwt, ipbwt_lower_bound
from dnasearch.rmi import (
    LinearModel,
    audit_errors,
    build_rmi,
    partition_by_error,
    rmi_lower_bound,
)

from conftest import random_reference


def build_pair(rng, n_bases, k):
    ref = random_reference(rng, n_bases)
    sa = build_suffix_array(ref)
    ix = build_ipbwt(ref, sa, k=k)
    return ix, build_rmi(ix)


class TestLinearModel:
    def test_predict_rounds_half_up_and_clamps(self):
        m = LinearModel(slope=1.0, intercept=0.5, avg_error=0.0)
        assert m.predict(np.longdouble(2.0), range_max=100) == 3  # 2.5 -> 3
        assert m.predict(np.longdouble(500.0), range_max=100) == 100
        assert m.predict(np.longdouble(-500.0), range_max=100) == 0

    def test_predict_many_matches_scalar(self):
        m = LinearModel(slope=0.37, intercept=12.1, avg_error=0.0)
        keys = np.linspace(-50, 400, 37).astype(np.longdouble)
        many = m.predict_many(keys, range_max=120)
        assert many.tolist() == [m.predict(k, 120) for k in keys]


class TestPartition:
    @given(st.integers(0, 2**32 - 1), st.integers(3, 200))
    @settings(max_examples=40, deadline=None)
    def test_partitions_respect_alpha(self, seed, size):
        rng = np.random.default_rng(seed)
        keys = np.sort(rng.uniform(0, 1e9, size=size)).astype(np.longdouble)
        positions = np.arange(size, dtype=np.int64)
        alpha = 2.0
        parts = partition_by_error(keys, positions, alpha, range_max=size - 1)
        # contiguous cover of [0, size)
        assert parts[0][0] == 0 and parts[-1][1] == size
        for (s1, e1, _), (s2, _, _) in zip(parts, parts[1:]):
            assert e1 == s2
        for s, e, model in parts:
            if e - s > 2:
                assert model.avg_error <= alpha

    def test_linear_keys_need_one_partition(self):
        keys = np.arange(1000, dtype=np.longdouble) * 7.0
        positions = np.arange(1000, dtype=np.int64)
        parts = partition_by_error(keys, positions, alpha=1.0, range_max=999)
        assert len(parts) == 1
        assert parts[0][2].avg_error == 0.0

    def test_alpha_must_be_positive(self):
        with pytest.raises(ValueError):
            partition_by_error(
                np.zeros(3, dtype=np.longdouble), np.arange(3), 0.0, range_max=2
            )


class TestBuild:
    def test_layers_root_to_leaf(self):
        rng = np.random.default_rng(1)
        ix, rmi = build_pair(rng, 3000, k=6)
        assert len(rmi.layers[0]) == 1  # single root model
        assert rmi.leaf is rmi.layers[-1]
        assert rmi.leaf.target_size == ix.n
        sizes = [len(layer) for layer in rmi.layers]
        assert sizes == sorted(sizes)  # layers narrow toward the root

    def test_audit_within_bounds(self):
        rng = np.random.default_rng(2)
        ix, rmi = build_pair(rng, 5000, k=8)
        leaf_depth = len(rmi.layers) - 1
        for depth, j, err in audit_errors(rmi, ix):
            layer = rmi.layers[depth]
            starts = layer.starts
            ends = np.append(starts[1:], layer.target_size if depth == leaf_depth else len(rmi.layers[depth + 1]))
            size = int(ends[j] - starts[j])
            if depth == 0 or size <= 2:
                continue  # the root carries no bound; tiny partitions are exempt
            bound = rmi.alpha_leaf if depth == leaf_depth else rmi.alpha_mid
            assert err <= bound

    def test_leaf_boundaries_are_entry_keys(self):
        rng = np.random.default_rng(3)
        ix, rmi = build_pair(rng, 800, k=4)
        leaf = rmi.leaf
        for j, s in enumerate(leaf.starts):
            assert leaf.boundary_hi[j] == ix.key_hi[s]
            assert leaf.boundary_lo[j] == ix.key_lo[s]


class TestLowerBound:
    @given(st.integers(0, 2**32 - 1))
    @settings(max_examples=30, deadline=None)
    def test_matches_plain_binary_search(self, seed):
        rng = np.random.default_rng(seed)
        n_bases = int(rng.integers(4, 120))
        k = int(rng.integers(1, min(6, n_bases) + 1))
        ix, rmi = build_pair(rng, n_bases, k=k)
        for _ in range(12):
            kmer = rng.integers(0, 5, size=k).tolist()
            loc = int(rng.integers(0, ix.n + 2))
            assert rmi_lower_bound(rmi, ix, kmer, loc) == ipbwt_lower_bound(ix, kmer, loc)

    def test_boundary_keys_map_to_their_rows(self):
        rng = np.random.default_rng(4)
        ix, rmi = build_pair(rng, 600, k=5)
        for i in range(ix.n):
            kmer, loc = ix.entry(i)
            assert rmi_lower_bound(rmi, ix, kmer, loc) == ipbwt_lower_bound(ix, kmer, loc)
