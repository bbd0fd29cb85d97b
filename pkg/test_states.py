"""
Unit tests for initial-state construction
"""
import math

import numpy as np
import pytest

from qtherm.core.config import Settings
from qtherm.core.exceptions import BasisLookupError, ConfigurationError
from qtherm.schemas.model import ModelSpec
from qtherm.services.hamiltonian import bath_prefactor_for, build_basis, initial_density
from qtherm.services.states import (
    TRUNCATED,
    UNDER_RESOLVED,
    build_basis_state,
    build_lorentzian_state,
    export_state_csv,
    local_density,
    lorentzian_weights,
    nearest_basis_index,
)


@pytest.fixture
def spec():
    return ModelSpec(
        temperature=6.22,
        bath_prefactor=bath_prefactor_for(300.0, 20.0, 6.22),
        coupling=0.0,
        center_energy=20.0,
        window_half_width=3.0,
        seed=0,
    )


@pytest.fixture
def basis(spec):
    """Zero-order basis with about 1800 entries."""
    return build_basis(spec, Settings(_env_file=None))


class TestLorentzianWeights:
    """Per-state Lorentzian probabilities."""

    def test_peak_value(self):
        assert lorentzian_weights(5.0, 5.0, 0.5, 10.0) == pytest.approx(1.0 / (math.pi * 0.5 * 10.0))

    def test_half_maximum_at_gamma(self):
        peak = lorentzian_weights(0.0, 0.0, 0.3, 1.0)
        assert lorentzian_weights(0.3, 0.0, 0.3, 1.0) == pytest.approx(0.5 * peak)

    def test_sum_over_dense_grid(self):
        rho = 1000.0
        energies = np.arange(-200.0, 200.0, 1.0 / rho)
        total = lorentzian_weights(energies, 0.0, 0.05, rho).sum()
        assert total == pytest.approx(1.0, abs=1e-3)

    def test_invalid_parameters(self):
        with pytest.raises(ConfigurationError):
            lorentzian_weights(0.0, 0.0, 0.1, 0.0)
        with pytest.raises(ConfigurationError):
            lorentzian_weights(0.0, 0.0, -0.1, 1.0)


class TestLorentzianState:
    """Random Lorentzian superpositions."""

    def test_normalized_on_one_level(self, basis):
        state = build_lorentzian_state(basis, 1, 20.0, 0.03, seed=7)
        assert state.norm == pytest.approx(1.0)
        off_level = basis.system_index != 1
        assert np.all(state.amplitudes[off_level] == 0)
        assert state.t == 0.0
        assert not state.flags

    def test_reproducible_streams(self, basis):
        first = build_lorentzian_state(basis, 0, 20.0, 0.1, seed=7, stream_keys=("run", 0))
        second = build_lorentzian_state(basis, 0, 20.0, 0.1, seed=7, stream_keys=("run", 0))
        other_key = build_lorentzian_state(basis, 0, 20.0, 0.1, seed=7, stream_keys=("run", 1))
        other_seed = build_lorentzian_state(basis, 0, 20.0, 0.1, seed=8, stream_keys=("run", 0))
        np.testing.assert_array_equal(first.amplitudes, second.amplitudes)
        assert not np.array_equal(first.amplitudes, other_key.amplitudes)
        assert not np.array_equal(first.amplitudes, other_seed.amplitudes)

    def test_envelope_follows_lorentzian(self, basis, spec):
        # averaged over many draws the probabilities follow L(E) / normalization
        rho0 = initial_density(spec, 0)
        members = basis.system_index == 0
        mean = np.mean(
            [build_lorentzian_state(basis, 0, 20.0, 0.2, seed=s, rho0=rho0).probabilities[members]
             for s in range(200)],
            axis=0,
        )
        expected = lorentzian_weights(basis.energies[members], 20.0, 0.2, rho0)
        expected /= expected.sum()
        near = np.abs(basis.energies[members] - 20.0) < 0.2
        np.testing.assert_allclose(mean[near].sum(), expected[near].sum(), rtol=0.05)

    def test_real_deviates(self, basis):
        state = build_lorentzian_state(basis, 0, 20.0, 0.1, seed=7, deviates="real")
        assert np.all(state.amplitudes.imag == 0)
        assert state.norm == pytest.approx(1.0)

    def test_unknown_deviates(self, basis):
        with pytest.raises(ConfigurationError):
            build_lorentzian_state(basis, 0, 20.0, 0.1, seed=7, deviates="uniform")

    def test_under_resolved_flag(self, basis):
        state = build_lorentzian_state(basis, 0, 20.0, 1e-4, seed=7)
        assert UNDER_RESOLVED in state.flags
        assert state.norm == pytest.approx(1.0)

    def test_truncated_flag(self, basis):
        state = build_lorentzian_state(basis, 0, 20.0, 1.0, seed=7)
        assert TRUNCATED in state.flags

    def test_invalid_width_and_level(self, basis):
        with pytest.raises(ConfigurationError):
            build_lorentzian_state(basis, 0, 20.0, 0.0, seed=7)
        with pytest.raises(ConfigurationError):
            build_lorentzian_state(basis, 3, 20.0, 0.1, seed=7)

    def test_local_density_estimate(self, basis, spec):
        assert local_density(basis, 0, 20.0) == pytest.approx(initial_density(spec, 0), rel=0.05)


class TestBasisState:
    """Single zero-order states."""

    def test_single_entry(self, basis):
        index = nearest_basis_index(basis, 2, 20.0)
        state = build_basis_state(basis, 2, int(basis.bath_index[index]))
        assert state.probabilities[index] == 1.0
        assert state.probabilities.sum() == 1.0
        assert basis.system_index[index] == 2

    def test_nearest_index_on_level(self, basis):
        index = nearest_basis_index(basis, 1, 20.0)
        level = basis.energies[basis.system_index == 1]
        assert basis.energies[index] == level[np.argmin(np.abs(level - 20.0))]

    def test_outside_window(self, basis):
        with pytest.raises(BasisLookupError):
            build_basis_state(basis, 0, 10 ** 6)


class TestExport:
    """State export table."""

    def test_columns(self, basis):
        state = build_lorentzian_state(basis, 0, 20.0, 0.1, seed=1)
        frame = export_state_csv(state)
        assert list(frame.columns) == ["s", "eps", "E_zero", "re", "im"]
        assert frame.shape[0] == basis.dimension
        assert (frame["re"] ** 2 + frame["im"] ** 2).sum() == pytest.approx(1.0)
