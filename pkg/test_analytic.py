"""
Unit tests for the closed-form entropy predictions
"""
import math

import numpy as np
import pytest

from qtherm.services.analytic import (
    PREDICTION_COLUMNS,
    classical_delta_s,
    convolution_half_width,
    eigenstate_width,
    evolved_width,
    final_width,
    fluctuation_correction,
    g0_constant,
    g0_monte_carlo,
    heuristic_env_entropy_change,
    is_resolved,
    lorentzian_entropy,
    master_entropy,
    master_excess,
    master_prediction,
    max_excess,
    prediction_table,
    regime_threshold,
    spreading_width,
)


class TestConstants:
    """Fluctuation constants."""

    def test_g0(self):
        assert g0_constant() == pytest.approx(0.42278, abs=1e-5)
        assert fluctuation_correction(2) == pytest.approx(g0_constant(), abs=1e-12)

    def test_real_deviate_correction(self):
        assert fluctuation_correction(1) == pytest.approx(0.72964, abs=1e-5)

    def test_invalid_dof(self):
        with pytest.raises(ValueError):
            fluctuation_correction(0)

    def test_monte_carlo_agrees(self):
        estimate, stderr = g0_monte_carlo(n_samples=400_000, seed=3, chunk_size=100_000)
        assert stderr > 0
        assert abs(estimate - g0_constant()) < 5.0 * stderr

    def test_monte_carlo_reproducible(self):
        assert g0_monte_carlo(n_samples=10_000, seed=1) == g0_monte_carlo(n_samples=10_000, seed=1)


class TestEntropies:
    """Lorentzian and master entropies."""

    def test_lorentzian_entropy(self):
        assert lorentzian_entropy(0.5, 10.0) == pytest.approx(math.log(4 * math.pi * 5.0) - g0_constant())

    def test_resolved_envelope_value(self):
        assert lorentzian_entropy(0.5, 1e4) == pytest.approx(10.6254, abs=1e-4)

    def test_lorentzian_entropy_needs_positive_product(self):
        with pytest.raises(ValueError):
            lorentzian_entropy(0.0, 10.0)

    def test_threshold(self):
        assert regime_threshold(1.0) == pytest.approx(0.12145, abs=1e-5)
        assert regime_threshold(50.0) == pytest.approx(0.12145 / 50.0, rel=1e-4)

    def test_master_entropy_continuous_at_threshold(self):
        rho = 20.0
        gamma = regime_threshold(rho)
        assert lorentzian_entropy(gamma, rho) == pytest.approx(0.0, abs=1e-12)
        assert master_entropy(0.5 * gamma, rho) == 0.0
        assert master_entropy(0.0, rho) == 0.0
        assert master_entropy(2.0 * gamma, rho) == pytest.approx(math.log(2.0))

    def test_master_entropy_invalid(self):
        with pytest.raises(ValueError):
            master_entropy(0.1, 0.0)


class TestWidths:
    """Envelope widths."""

    def test_spreading_and_final_width(self):
        assert spreading_width(0.1, 50.0) == pytest.approx(math.pi)
        assert final_width(0.2, 0.1, 50.0) == pytest.approx(0.2 + math.pi)

    def test_evolved_width_doubles_eigenstate_width(self):
        assert eigenstate_width(0.1, 50.0) == pytest.approx(0.5 * math.pi)
        assert evolved_width(0.1, 50.0) == pytest.approx(2.0 * eigenstate_width(0.1, 50.0))

    def test_eigenstate_width_value(self):
        assert eigenstate_width(0.9e-4, 1e6) == pytest.approx(0.02545, abs=1e-5)

    def test_convolution_half_widths_add(self):
        assert convolution_half_width(0.1, 0.2) == pytest.approx(0.3, rel=1e-6)
        assert convolution_half_width(1.0, 1.0) == pytest.approx(2.0, rel=1e-6)

    def test_convolution_invalid(self):
        with pytest.raises(ValueError):
            convolution_half_width(0.0, 1.0)


class TestExcess:
    """Excess entropy predictions."""

    def test_resolved_excess(self):
        assert master_excess(0.5, 100.0, 200.0, 0.02) == pytest.approx(
            math.log((0.5 + spreading_width(0.02, 200.0)) / 0.5)
        )

    def test_clamped_excess_is_maximum(self):
        rho0, rho_f, k = 100.0, 200.0, 0.02
        assert master_excess(1e-4, rho0, rho_f, k) == max_excess(rho0, rho_f, k)
        assert master_excess(0.0, rho0, rho_f, k) == max_excess(rho0, rho_f, k)

    def test_max_excess_formula(self):
        expected = math.log(8 * math.pi ** 2 * 0.02 ** 2 * 200.0 * 100.0) - g0_constant()
        assert max_excess(100.0, 200.0, 0.02) == pytest.approx(expected)

    def test_lorentzian_excess_value(self):
        rho_f = 1e4
        k = math.sqrt(0.0509 / (2.0 * math.pi * rho_f))
        assert master_excess(0.0625, 1e4, rho_f, k) == pytest.approx(0.5958, abs=1e-4)

    def test_basis_state_excess_value(self):
        assert max_excess(1e6, 2.5765e6, 0.9e-4) == pytest.approx(13.89, abs=0.01)

    @pytest.mark.parametrize("gamma0", [0.5, 0.05, 0.0])
    def test_entropy_change_splits_into_classical_and_excess(self, gamma0):
        # a basis state (gamma0 = 0) starts at zero entropy with the maximal excess
        rho0, rho_f, k = 100.0, 250.0, 0.02
        change = master_entropy(final_width(gamma0, k, rho_f), rho_f) - master_entropy(gamma0, rho0)
        assert change == pytest.approx(classical_delta_s(rho0, rho_f) + master_excess(gamma0, rho0, rho_f, k), abs=1e-12)

    def test_basis_state_excess_fixed_by_k_rho_products(self):
        k, rho0, rho_f = 0.02, 100.0, 250.0
        values = [max_excess(rho0 * 2 ** i, rho_f * 2 ** i, k / 2 ** i) for i in range(5)]
        np.testing.assert_allclose(values, values[0], rtol=1e-12)
        sweep = [master_excess(0.0, rho0 * 2 ** i, rho_f * 2 ** i, k / 2 ** i) for i in range(5)]
        np.testing.assert_allclose(sweep, values[0], rtol=1e-12)

    def test_classical_and_heuristic(self):
        assert classical_delta_s(100.0, 200.0) == pytest.approx(math.log(2.0))
        assert heuristic_env_entropy_change(-1.5, 3.0, 0.2) == pytest.approx(-0.3)
        with pytest.raises(ValueError):
            classical_delta_s(0.0, 1.0)


class TestPredictions:
    """Prediction records and overlay table."""

    def test_resolved_prediction(self):
        prediction = master_prediction(0.5, 100.0, 200.0, 0.02)
        assert prediction.regime == "resolved"
        assert is_resolved(0.5, 100.0)
        assert prediction.gamma_f == pytest.approx(final_width(0.5, 0.02, 200.0))
        assert prediction.s_initial == pytest.approx(lorentzian_entropy(0.5, 100.0))
        assert prediction.dsx_pred == pytest.approx(master_excess(0.5, 100.0, 200.0, 0.02))

    def test_basis_state_prediction(self):
        prediction = master_prediction(0.0, 100.0, 200.0, 0.02)
        assert prediction.regime == "clamped"
        assert prediction.s_l_initial is None
        assert prediction.s_initial == 0.0
        assert prediction.dsx_pred == prediction.dsx_max

    def test_uncoupled_basis_state(self):
        prediction = master_prediction(0.0, 100.0, 200.0, 0.0)
        assert prediction.gamma_f == 0.0
        assert prediction.s_l_final is None
        assert prediction.dsx_pred == 0.0

    def test_prediction_table(self):
        table = prediction_table([master_prediction(g, 100.0, 200.0, 0.02) for g in (0.0, 0.1, 1.0)])
        assert list(table.columns) == PREDICTION_COLUMNS
        assert table["regime"].tolist() == ["clamped", "resolved", "resolved"]
        assert table["dSx_pred"].is_monotonic_decreasing
