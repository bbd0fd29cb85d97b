"""
Unit tests for atomic result writes and the spectral cache
"""
import json

import numpy as np
import pandas as pd
import pytest

from qtherm.core.exceptions import CacheIntegrityError
from qtherm.models.state import SpectralDecomposition
from qtherm.schemas.model import ModelSpec
from qtherm.schemas.results import CheckResult
from qtherm.services.persistence import SpectralCache, file_digest, write_csv, write_json


@pytest.fixture
def spec():
    return ModelSpec(temperature=6.22, bath_prefactor=2.5, coupling=0.01, center_energy=20.0,
                     window_half_width=2.0, seed=1)


@pytest.fixture
def decomp():
    rng = np.random.default_rng(0)
    q, _ = np.linalg.qr(rng.standard_normal((6, 6)))
    return SpectralDecomposition(eigenvalues=np.sort(rng.standard_normal(6)), eigenvectors=q)


class TestWriters:
    """CSV and JSON output."""

    def test_csv_is_byte_stable(self, tmp_path):
        frame = pd.DataFrame({"t": [0.0, 0.5], "S_univ": [1.0 / 3.0, 2.0]})
        first = write_csv(frame, tmp_path / "a.csv")
        second = write_csv(frame.copy(), tmp_path / "b.csv")
        assert first.read_bytes() == second.read_bytes()
        assert first.read_text().splitlines()[1] == "0.0000000000e+00,3.3333333333e-01"
        assert file_digest(first) == file_digest(second)
        assert sorted(p.name for p in tmp_path.iterdir()) == ["a.csv", "b.csv"]

    def test_csv_creates_parents(self, tmp_path):
        path = write_csv(pd.DataFrame({"x": [1]}), tmp_path / "nested" / "deeper" / "x.csv")
        assert path.exists()

    def test_json_from_model_and_dict(self, tmp_path):
        model_path = write_json(CheckResult(criterion=1, name="identities", passed=True), tmp_path / "m.json")
        assert json.loads(model_path.read_text())["name"] == "identities"
        dict_path = write_json({"b": 1, "a": 2}, tmp_path / "d.json")
        assert dict_path.read_text().index('"a"') < dict_path.read_text().index('"b"')

    def test_digest_changes_with_content(self, tmp_path):
        a = tmp_path / "a.txt"
        a.write_text("one")
        before = file_digest(a)
        a.write_text("two")
        assert file_digest(a) != before


class TestSpectralCache:
    """Binary cache entries."""

    def test_round_trip(self, tmp_path, spec, decomp):
        cache = SpectralCache(tmp_path)
        assert cache.load(spec) is None
        cache.store(spec, decomp)
        loaded = cache.load(spec, dimension=6)
        np.testing.assert_array_equal(loaded.eigenvalues, decomp.eigenvalues)
        np.testing.assert_array_equal(loaded.eigenvectors, decomp.eigenvectors)

    def test_key_depends_on_model(self, tmp_path, spec):
        cache = SpectralCache(tmp_path)
        assert cache.path_for(spec) != cache.path_for(spec.model_copy(update={"seed": 2}))
        assert cache.path_for(spec) == cache.path_for(ModelSpec(**spec.model_dump()))

    def test_dimension_mismatch(self, tmp_path, spec, decomp):
        cache = SpectralCache(tmp_path)
        cache.store(spec, decomp)
        with pytest.raises(CacheIntegrityError):
            cache.load(spec, dimension=7)

    def test_entry_of_another_model(self, tmp_path, spec, decomp):
        cache = SpectralCache(tmp_path)
        other = spec.model_copy(update={"seed": 2})
        cache.store(other, decomp)
        cache.path_for(other).rename(cache.path_for(spec))
        with pytest.raises(CacheIntegrityError):
            cache.load(spec)

    def test_corrupted_payload(self, tmp_path, spec, decomp):
        cache = SpectralCache(tmp_path)
        path = cache.store(spec, decomp)
        data = bytearray(path.read_bytes())
        data[-1] ^= 0xFF
        path.write_bytes(bytes(data))
        with pytest.raises(CacheIntegrityError):
            cache.load(spec)

    def test_truncated_file(self, tmp_path, spec, decomp):
        cache = SpectralCache(tmp_path)
        path = cache.store(spec, decomp)
        path.write_bytes(path.read_bytes()[:20])
        with pytest.raises(CacheIntegrityError):
            cache.load(spec)
