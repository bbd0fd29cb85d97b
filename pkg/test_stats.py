"""
Unit tests for binned profiles, Lorentzian fits and fluctuation tests
"""
import math

import numpy as np
import pytest

from qtherm.core.config import Settings
from qtherm.core.exceptions import ConfigurationError, InsufficientDataError
from qtherm.models.profile import BinnedProfile
from qtherm.services.stats import (
    PROFILE_COLUMNS,
    bin_profile,
    chi2_quartiles,
    default_bin_count,
    fit_lorentzian,
    fluctuation_test,
    lorentzian_profile,
    profile_frame,
    quartile_overlay,
    rescale_coefficients,
)


@pytest.fixture
def settings():
    return Settings(_env_file=None)


@pytest.fixture
def lorentzian_samples():
    """Noiseless Lorentzian weights on a dense grid."""
    energies = np.linspace(15.0, 25.0, 4001)
    weights = lorentzian_profile(energies, 20.3, 0.4, 1.0) / 400.0
    return energies, weights


def exact_profile(center: float, width: float, amplitude: float, low: float, high: float,
                  n_bins: int = 60) -> BinnedProfile:
    """Profile whose bin means are the Lorentzian at the bin centers."""
    edges = np.linspace(low, high, n_bins + 1)
    mean = lorentzian_profile(0.5 * (edges[:-1] + edges[1:]), center, width, amplitude)
    return BinnedProfile(edges=edges, mean=mean, q1=mean.copy(), median=mean.copy(), q3=mean.copy(),
                         count=np.full(n_bins, 4, dtype=np.int64))


class TestBinProfile:
    """Equal-width binning."""

    def test_counts_and_means(self):
        energies = np.arange(100) / 10.0 + 0.05
        weights = np.ones(100)
        profile = bin_profile(energies, weights, n_bins=10, energy_range=(0.0, 10.0))
        assert profile.n_bins == 10
        assert profile.count.sum() == 100
        np.testing.assert_array_equal(profile.count, np.full(10, 10))
        np.testing.assert_allclose(profile.mean, 1.0)
        assert profile.total_weight == pytest.approx(100.0)
        assert not profile.degenerate

    def test_quartiles(self):
        energies = np.full(4, 0.05)
        weights = np.array([1.0, 2.0, 3.0, 4.0])
        profile = bin_profile(np.append(energies, 0.95), np.append(weights, 0.0), n_bins=10, energy_range=(0.0, 1.0))
        assert profile.count[0] == 4
        assert profile.q1[0] == pytest.approx(1.75)
        assert profile.median[0] == pytest.approx(2.5)
        assert profile.q3[0] == pytest.approx(3.25)

    def test_empty_bins_are_nan(self):
        profile = bin_profile(np.array([0.0, 1.0]), np.array([0.5, 0.5]), n_bins=10)
        assert profile.empty.sum() == 8
        assert np.isnan(profile.mean[profile.empty]).all()

    def test_degenerate_profile(self):
        energies = np.linspace(0.0, 1.0, 50)
        weights = np.zeros(50)
        weights[10] = 1.0
        profile = bin_profile(energies, weights, n_bins=10, energy_range=(0.0, 1.0))
        assert profile.degenerate

    def test_invalid_inputs(self):
        with pytest.raises(ConfigurationError):
            bin_profile(np.arange(5.0), np.ones(5), n_bins=5)
        with pytest.raises(InsufficientDataError):
            bin_profile(np.array([]), np.array([]))
        with pytest.raises(InsufficientDataError):
            bin_profile(np.arange(5.0), np.zeros(5))

    def test_default_bin_count(self, settings):
        assert default_bin_count(10.0, 0.5, settings) == 80
        assert default_bin_count(1.0, 0.5, settings) == settings.min_bins
        assert default_bin_count(1.0, 0.0, settings) == settings.min_bins


class TestFitLorentzian:
    """Envelope fits."""

    def test_recovers_noiseless_parameters(self, lorentzian_samples, settings):
        energies, weights = lorentzian_samples
        profile = bin_profile(energies, weights, n_bins=80, energy_range=(15.0, 25.0))
        fit = fit_lorentzian(profile, center=20.0, width=0.6, settings=settings)
        assert fit.converged
        assert fit.center == pytest.approx(20.3, abs=0.01)
        assert fit.width == pytest.approx(0.4, rel=0.03)
        assert fit.n_bins == 80

    def test_too_few_bins(self, settings):
        profile = bin_profile(np.array([0.0, 0.5, 1.0]), np.array([1.0, 2.0, 1.0]), n_bins=10)
        with pytest.raises(InsufficientDataError):
            fit_lorentzian(profile, center=0.5, width=0.1, settings=settings)

    def test_span_too_narrow(self, lorentzian_samples, settings):
        energies, weights = lorentzian_samples
        profile = bin_profile(energies, weights, n_bins=20, energy_range=(20.0, 20.6))
        with pytest.raises(InsufficientDataError):
            fit_lorentzian(profile, center=20.3, width=0.4, settings=settings)


    def test_energy_rescaling(self, lorentzian_samples, settings):
        energies, weights = lorentzian_samples
        fit = fit_lorentzian(bin_profile(energies, weights, n_bins=77, energy_range=(15.0, 25.0)),
                             center=20.0, width=0.6, settings=settings)
        scaled = fit_lorentzian(bin_profile(3.0 * energies, weights, n_bins=77, energy_range=(45.0, 75.0)),
                                center=60.0, width=1.8, settings=settings)
        assert scaled.center == pytest.approx(3.0 * fit.center, rel=1e-5)
        assert scaled.width == pytest.approx(3.0 * fit.width, rel=1e-5)
        assert scaled.amplitude == pytest.approx(3.0 * fit.amplitude, rel=1e-5)

    def test_refit_recovers_parameters(self, settings):
        fit = fit_lorentzian(exact_profile(2.0, 0.3, 0.05, 0.0, 4.0), center=1.8, width=0.5, settings=settings)
        assert fit.center == pytest.approx(2.0, abs=1e-6)
        assert fit.width == pytest.approx(0.3, rel=1e-6)
        assert fit.amplitude == pytest.approx(0.05, rel=1e-6)

        refit = fit_lorentzian(exact_profile(fit.center, fit.width, fit.amplitude, 0.0, 4.0),
                               center=fit.center + 0.1, width=2.0 * fit.width, settings=settings)
        assert refit.center == pytest.approx(fit.center, abs=1e-6)
        assert refit.width == pytest.approx(fit.width, rel=1e-6)
        assert refit.amplitude == pytest.approx(fit.amplitude, rel=1e-6)

    def test_weights_cover_every_bin(self, lorentzian_samples, settings):
        energies, weights = lorentzian_samples
        profile = bin_profile(energies, weights, n_bins=120, energy_range=(10.0, 25.0))
        assert profile.empty.any()
        fit = fit_lorentzian(profile, center=20.0, width=0.6, weights=np.ones(profile.n_bins), settings=settings)
        assert fit.center == pytest.approx(20.3, abs=0.01)
        assert fit.n_bins < profile.n_bins

    def test_weights_length_checked(self, lorentzian_samples, settings):
        energies, weights = lorentzian_samples
        profile = bin_profile(energies, weights, n_bins=80, energy_range=(15.0, 25.0))
        with pytest.raises(ConfigurationError):
            fit_lorentzian(profile, center=20.0, width=0.6, weights=np.ones(10), settings=settings)


class TestFluctuations:
    """Coefficient rescaling and moment tests."""

    def test_normal_sample_passes(self):
        rng = np.random.default_rng(0)
        report = fluctuation_test(rng.standard_normal(20000))
        assert report.passed
        assert set(report.components) == {"g"}
        assert report.components["g"].n == 20000

    def test_complex_components(self):
        rng = np.random.default_rng(1)
        values = rng.standard_normal(20000) + 1j * rng.standard_normal(20000)
        report = fluctuation_test(values)
        assert set(report.components) == {"re", "im"}
        assert report.passed

    def test_uniform_sample_fails(self):
        rng = np.random.default_rng(2)
        report = fluctuation_test(rng.uniform(-1.0, 1.0, 20000))
        assert not report.passed

    def test_needs_enough_samples(self):
        with pytest.raises(InsufficientDataError):
            fluctuation_test(np.zeros(499))

    def test_rescale_coefficients(self):
        lorentzian = np.array([4.0, 0.25])
        np.testing.assert_allclose(rescale_coefficients(np.array([2.0, 1.0]), lorentzian, False), [1.0, 2.0])
        rescaled = rescale_coefficients(np.array([2.0 + 2.0j, 0.5j]), lorentzian, True)
        np.testing.assert_allclose(rescaled, [math.sqrt(2.0) * (1.0 + 1.0j), math.sqrt(2.0) * 1.0j])


class TestQuartiles:
    """Expected quartiles of fluctuating amplitudes."""

    def test_complex_quartiles(self):
        q1, q3 = chi2_quartiles(2)
        assert q1 == pytest.approx(math.log(4.0 / 3.0))
        assert q3 == pytest.approx(math.log(4.0))

    def test_real_quartiles(self):
        q1, q3 = chi2_quartiles(1)
        assert q1 == pytest.approx(0.1015, abs=1e-4)
        assert q3 == pytest.approx(1.3233, abs=1e-4)

    def test_invalid_dof(self):
        with pytest.raises(ConfigurationError):
            chi2_quartiles(3)

    def test_overlay_and_frame(self):
        profile = bin_profile(np.arange(100) / 10.0 + 0.05, np.ones(100), n_bins=10, energy_range=(0.0, 10.0))
        expected = np.full(10, 2.0)
        q1, q3 = quartile_overlay(profile, 2, expected)
        np.testing.assert_allclose(q1, 2.0 * math.log(4.0 / 3.0))
        np.testing.assert_allclose(q3, 2.0 * math.log(4.0))
        frame = profile_frame(profile, expected, 2)
        assert list(frame.columns) == PROFILE_COLUMNS
        assert frame.shape[0] == 10
