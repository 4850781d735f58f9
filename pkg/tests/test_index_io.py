import numpy as np
import pytest

from dnasearch.index_io import CorruptIndexError, load_index, save_index
from dnasearch.search import (
    ModeUnavailableError,
    batch_search_matrix,
    build_engine,
)

from conftest import make_reference, random_reference


@pytest.fixture()
def engine_and_ref():
    rng = np.random.default_rng(21)
    ref = random_reference(rng, 500, name="disk")
    return build_engine(ref, k=4), ref


class TestRoundTrip:
    def test_structures_identical(self, engine_and_ref, tmp_path):
        engine, ref = engine_and_ref
        path = str(tmp_path / "a.idx")
        sizes = save_index(path, engine, ref_name=ref.name)
        assert sizes["total"] == (tmp_path / "a.idx").stat().st_size
        loaded, ref2, meta = load_index(path)
        assert ref2.name == "reference" or ref2.name  # name not persisted per-record
        assert np.array_equal(loaded.fm.sa, engine.fm.sa)
        assert np.array_equal(loaded.fm.bwt, engine.fm.bwt)
        assert np.array_equal(loaded.ipbwt.key_hi, engine.ipbwt.key_hi)
        assert np.array_equal(loaded.ipbwt.key_lo, engine.ipbwt.key_lo)
        assert np.array_equal(ref2.ranks, ref.ranks)
        assert len(loaded.rmi.layers) == len(engine.rmi.layers)
        for la, lb in zip(loaded.rmi.layers, engine.rmi.layers):
            assert np.array_equal(la.boundary_hi, lb.boundary_hi)
            assert np.array_equal(la.starts, lb.starts)
            for ma, mb in zip(la.models, lb.models):
                assert (ma.slope, ma.intercept, ma.avg_error) == (
                    mb.slope,
                    mb.intercept,
                    mb.avg_error,
                )

    def test_results_identical_after_reload(self, engine_and_ref, tmp_path):
        engine, ref = engine_and_ref
        path = str(tmp_path / "b.idx")
        save_index(path, engine, ref_name=ref.name)
        loaded, _, _ = load_index(path)
        rng = np.random.default_rng(3)
        qm = rng.integers(1, 5, size=(200, 9)).astype(np.uint8)
        for mode in ("rmi", "binary", "fm"):
            a = batch_search_matrix(engine, qm, mode=mode)
            b = batch_search_matrix(loaded, qm, mode=mode)
            assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])

    def test_sentinel_rows_survive(self, tmp_path):
        engine = build_engine(make_reference("CATTATTAGGA"), k=3)
        path = str(tmp_path / "c.idx")
        save_index(path, engine)
        loaded, _, _ = load_index(path)
        assert len(loaded.ipbwt.sentinels) == len(engine.ipbwt.sentinels)
        for sa_, sb in zip(loaded.ipbwt.sentinels, engine.ipbwt.sentinels):
            assert sa_.row == sb.row and sa_.loc == sb.loc
            assert sa_.kmer_ranks.tolist() == sb.kmer_ranks.tolist()

    def test_no_rmi_round_trip(self, tmp_path):
        engine = build_engine(make_reference("ATACGACATT"), k=3, with_rmi=False)
        path = str(tmp_path / "d.idx")
        save_index(path, engine)
        loaded, _, meta = load_index(path)
        assert loaded.rmi is None
        with pytest.raises(ModeUnavailableError):
            loaded.require_mode("rmi")
        loaded.require_mode("binary")


class TestCorruption:
    def test_truncated_file(self, engine_and_ref, tmp_path):
        engine, ref = engine_and_ref
        path = tmp_path / "t.idx"
        save_index(str(path), engine)
        data = path.read_bytes()
        path.write_bytes(data[: len(data) // 2])
        with pytest.raises(CorruptIndexError) as exc:
            load_index(str(path))
        assert exc.value.section  # names the failing section

    def test_bad_magic(self, engine_and_ref, tmp_path):
        engine, ref = engine_and_ref
        path = tmp_path / "m.idx"
        save_index(str(path), engine)
        data = bytearray(path.read_bytes())
        data[:4] = b"XXXX"
        path.write_bytes(bytes(data))
        with pytest.raises(CorruptIndexError):
            load_index(str(path))

    def test_empty_file(self, tmp_path):
        path = tmp_path / "e.idx"
        path.write_bytes(b"")
        with pytest.raises(CorruptIndexError):
            load_index(str(path))
