"""
Statistical evidence from amplitudes: energy-binned profiles with
quartiles, Lorentzian envelope fits and fluctuation moment tests.
"""
import logging
import math
from typing import Optional, Tuple

import numpy as np
import pandas as pd
from scipy import optimize
from scipy import stats as sp_stats

from qtherm.core.config import Settings, get_settings
from qtherm.core.exceptions import ConfigurationError, FitError, InsufficientDataError
from qtherm.models.profile import BinnedProfile
from qtherm.models.state import PureState
from qtherm.schemas.results import ComponentMoments, FluctuationReport, LorentzianFit

logger = logging.getLogger(__name__)

MIN_BINS = 10
MIN_FIT_BINS = 5
MIN_FIT_SPAN_WIDTHS = 4.0
MIN_FLUCTUATION_SAMPLES = 500
DEGENERATE_FRACTION = 1.0 - 1e-12

# moment thresholds against the standard normal
MEAN_TOLERANCE = 0.1
VARIANCE_TOLERANCE = 0.1
SKEW_TOLERANCE = 0.2
KURTOSIS_TOLERANCE = 0.5

PROFILE_COLUMNS = ["bin_center", "mean", "q1", "q3", "count", "expected_mean", "expected_q1", "expected_q3"]


def default_bin_count(span: float, gamma_pred: float, settings: Optional[Settings] = None) -> int:
    """max(min_bins, ceil(span / gamma) * bins_per_width)."""
    settings = settings or get_settings()
    if gamma_pred <= 0:
        return settings.min_bins
    return max(settings.min_bins, int(math.ceil(span / gamma_pred)) * settings.bins_per_width)


def state_samples(state: PureState, system_level: Optional[int] = None,
                  energy_range: Optional[Tuple[float, float]] = None) -> Tuple[np.ndarray, np.ndarray]:
    """Zero-order energies and |c|^2 of a state, optionally restricted to one level and an energy range."""
    basis = state.basis
    mask = np.ones(basis.dimension, dtype=bool)
    if system_level is not None:
        mask &= basis.system_index == system_level
    if energy_range is not None:
        mask &= (basis.energies >= energy_range[0]) & (basis.energies <= energy_range[1])
    return basis.energies[mask], state.probabilities[mask]


def bin_profile(energies: np.ndarray, weights: np.ndarray, n_bins: int = 25,
                energy_range: Optional[Tuple[float, float]] = None) -> BinnedProfile:
    """
    Average squared amplitudes on equal-width energy bins.

    Bins cover ``energy_range`` or, by default, the range of energies with
    non-zero weight. Every sample inside the range counts, including
    zero-weight ones.

    Args:
        energies: Zero-order energies of the samples
        weights: |c|^2 of the samples
        n_bins: Number of bins, at least 10
        energy_range: Optional (low, high) bin range

    Returns:
        BinnedProfile; ``degenerate`` is set when all weight falls into one bin
    """
    energies = np.asarray(energies, dtype=float)
    weights = np.asarray(weights, dtype=float)
    if n_bins < MIN_BINS:
        raise ConfigurationError(f"At least {MIN_BINS} bins are required, got {n_bins}")
    if energies.shape[0] == 0 or energies.shape != weights.shape:
        raise InsufficientDataError("Profile needs a non-empty set of (energy, weight) samples")

    if energy_range is None:
        occupied = energies[weights > 0]
        if occupied.shape[0] == 0:
            raise InsufficientDataError("Profile has no weight")
        low, high = float(occupied.min()), float(occupied.max())
    else:
        low, high = map(float, energy_range)
    if high <= low:
        low, high = low - 0.5, low + 0.5

    inside = (energies >= low) & (energies <= high)
    e, w = energies[inside], weights[inside]
    edges = np.linspace(low, high, n_bins + 1)
    index = np.clip(((e - low) / (high - low) * n_bins).astype(np.int64), 0, n_bins - 1)

    grouped = pd.DataFrame({"bin": index, "w": w}).groupby("bin")["w"]
    table = grouped.agg(["count", "mean", "sum"])
    table = table.join(grouped.quantile([0.25, 0.5, 0.75]).unstack())
    table = table.reindex(range(n_bins))

    total = float(w.sum())
    degenerate = total > 0 and float(table["sum"].max()) >= DEGENERATE_FRACTION * total
    if degenerate:
        logger.warning(f"Degenerate profile: all weight falls into one of {n_bins} bins")

    return BinnedProfile(
        edges=edges,
        mean=table["mean"].to_numpy(dtype=float),
        q1=table[0.25].to_numpy(dtype=float),
        median=table[0.5].to_numpy(dtype=float),
        q3=table[0.75].to_numpy(dtype=float),
        count=table["count"].fillna(0).to_numpy(dtype=np.int64),
        degenerate=bool(degenerate),
    )


def lorentzian_profile(energies: np.ndarray, center: float, width: float, amplitude: float) -> np.ndarray:
    """(amplitude / pi) * width / ((E - center)^2 + width^2)."""
    return amplitude * width / (math.pi * ((np.asarray(energies) - center) ** 2 + width ** 2))


def fit_lorentzian(profile: BinnedProfile, center: float, width: float, amplitude: Optional[float] = None,
                   weights: Optional[np.ndarray] = None, min_count: int = 1,
                   settings: Optional[Settings] = None) -> LorentzianFit:
    """
    Weighted relative least-squares Lorentzian fit to bin means.

    Residuals are w * (mean - model) / model with w = sqrt(count) by default,
    minimized by Levenberg-Marquardt with the analytic Jacobian.

    Args:
        profile: Binned profile
        center: Initial center, usually the predicted one
        width: Initial half-width, usually the predicted one
        amplitude: Initial amplitude; estimated from the peak bin when omitted
        weights: Per-bin weights over all bins of ``profile``; entries of unused bins are ignored
        min_count: Bins with fewer samples are ignored

    Returns:
        LorentzianFit with standard errors from the Jacobian

    Raises:
        ConfigurationError: ``weights`` does not have one entry per bin
        InsufficientDataError: Fewer than 5 populated bins or too narrow a span
        FitError: Non-convergence within the iteration budget
    """
    settings = settings or get_settings()
    if weights is not None and np.shape(weights) != (profile.n_bins,):
        raise ConfigurationError(
            f"Need one fit weight per bin ({profile.n_bins}), got shape {np.shape(weights)}"
        )
    usable = (profile.count >= max(min_count, 1)) & np.isfinite(profile.mean) & (profile.mean > 0)
    x = profile.centers[usable]
    y = profile.mean[usable]
    if x.shape[0] < MIN_FIT_BINS:
        raise InsufficientDataError(f"Need at least {MIN_FIT_BINS} populated bins, got {x.shape[0]}")
    if x.max() - x.min() < MIN_FIT_SPAN_WIDTHS * width:
        raise InsufficientDataError(
            f"Populated bins span {x.max() - x.min():.4g}, less than {MIN_FIT_SPAN_WIDTHS} half-widths",
            details={"span": float(x.max() - x.min()), "width": width},
        )
    w = np.sqrt(profile.count[usable].astype(float)) if weights is None else np.asarray(weights, dtype=float)[usable]
    if amplitude is None:
        amplitude = float(y.max()) * math.pi * width

    # fit in coordinates relative to the initial center
    shifted = x - center

    def model(params: np.ndarray) -> np.ndarray:
        return lorentzian_profile(shifted, params[0], params[1], params[2])

    def residuals(params: np.ndarray) -> np.ndarray:
        m = model(params)
        return w * (y - m) / m

    def jacobian(params: np.ndarray) -> np.ndarray:
        c, g, a = params
        m = model(params)
        d = (shifted - c) ** 2 + g ** 2
        dlog = np.column_stack([2.0 * (shifted - c) / d, 1.0 / g - 2.0 * g / d, np.full_like(d, 1.0 / a)])
        return -(w * y / m)[:, None] * dlog

    start = np.array([0.0, width, amplitude], dtype=float)
    result = optimize.least_squares(
        residuals,
        start,
        jac=jacobian,
        method="lm",
        x_scale="jac",
        xtol=settings.fit_tolerance,
        max_nfev=settings.fit_max_iterations,
    )
    c_hat, g_hat, a_hat = result.x
    if not result.success or not np.all(np.isfinite(result.x)) or g_hat == 0 or a_hat * g_hat <= 0:
        raise FitError(
            f"Lorentzian fit did not converge: {result.message}",
            details={
                "status": int(result.status),
                "iterations": int(result.nfev),
                "last_iterate": {"center": float(center + c_hat), "width": float(abs(g_hat)),
                                 "amplitude": float(a_hat)},
            },
        )

    dof = max(x.shape[0] - 3, 1)
    scale = 2.0 * result.cost / dof
    stderr = [None, None, None]
    try:
        covariance = np.linalg.pinv(result.jac.T @ result.jac) * scale
        stderr = [float(math.sqrt(v)) if v >= 0 else None for v in np.diag(covariance)]
    except np.linalg.LinAlgError:
        logger.warning("Could not estimate fit covariance")

    residual_norm = float(np.linalg.norm(result.fun))
    fit = LorentzianFit(
        center=float(center + c_hat),
        width=float(abs(g_hat)),
        amplitude=float(abs(a_hat)),
        residual_norm=residual_norm,
        stderr_center=stderr[0],
        stderr_width=stderr[1],
        stderr_amplitude=stderr[2],
        n_bins=int(x.shape[0]),
        iterations=int(result.nfev),
        converged=True,
    )
    # count-weighted relative residuals are O(1) per bin for chi-squared fluctuations
    if weights is None and residual_norm > 3.0 * math.sqrt(2.0 * x.shape[0]):
        logger.warning(f"Lorentzian fit has a large residual norm {residual_norm:.4g}")
    logger.debug(f"Lorentzian fit: center={fit.center:.6g}, width={fit.width:.6g}, amplitude={fit.amplitude:.6g}")
    return fit


def _component_moments(values: np.ndarray) -> ComponentMoments:
    n = int(values.shape[0])
    mean = float(np.mean(values))
    variance = float(np.var(values, ddof=1))
    if variance > 0:
        skewness = float(sp_stats.skew(values))
        kurtosis = float(sp_stats.kurtosis(values, fisher=True))
    else:
        skewness, kurtosis = 0.0, -3.0
    passed = (
        abs(mean) <= MEAN_TOLERANCE
        and abs(variance - 1.0) <= VARIANCE_TOLERANCE
        and abs(skewness) <= SKEW_TOLERANCE
        and abs(kurtosis) <= KURTOSIS_TOLERANCE
    )
    return ComponentMoments(n=n, mean=mean, variance=variance, skewness=skewness,
                            excess_kurtosis=kurtosis, passed=passed)


def fluctuation_test(values: np.ndarray) -> FluctuationReport:
    """
    Moment test of rescaled coefficients against the standard normal.

    Real input is tested as one component "g"; complex input as "re" and "im".

    Raises:
        InsufficientDataError: Fewer than 500 samples
    """
    values = np.asarray(values)
    if values.shape[0] < MIN_FLUCTUATION_SAMPLES:
        raise InsufficientDataError(
            f"Fluctuation test needs at least {MIN_FLUCTUATION_SAMPLES} samples, got {values.shape[0]}"
        )
    if np.iscomplexobj(values):
        components = {"re": _component_moments(values.real), "im": _component_moments(values.imag)}
    else:
        components = {"g": _component_moments(values.astype(float))}
    return FluctuationReport(components=components, passed=all(c.passed for c in components.values()))


def rescale_coefficients(amplitudes: np.ndarray, lorentzian: np.ndarray, complex_valued: bool) -> np.ndarray:
    """
    Remove the envelope from coefficients.

    Real eigenvector coefficients become c / sqrt(L); complex evolved
    amplitudes become c / sqrt(L/2), whose real and imaginary parts are
    then standard normal.
    """
    lorentzian = np.asarray(lorentzian, dtype=float)
    if complex_valued:
        return np.asarray(amplitudes, dtype=complex) / np.sqrt(0.5 * lorentzian)
    return np.real(amplitudes) / np.sqrt(lorentzian)


def chi2_quartiles(dof: int) -> Tuple[float, float]:
    """Quartiles of chi^2_dof / dof, the unit-mean fluctuation of |c|^2."""
    if dof not in (1, 2):
        raise ConfigurationError(f"dof must be 1 or 2, got {dof}")
    q1, q3 = sp_stats.chi2.ppf([0.25, 0.75], dof) / dof
    return float(q1), float(q3)


def quartile_overlay(profile: BinnedProfile, dof: int,
                     expected_mean: Optional[np.ndarray] = None) -> Tuple[np.ndarray, np.ndarray]:
    """Expected per-bin Q1 and Q3 as mean times the chi^2 quartiles."""
    q1, q3 = chi2_quartiles(dof)
    base = profile.mean if expected_mean is None else np.asarray(expected_mean, dtype=float)
    return base * q1, base * q3


def profile_frame(profile: BinnedProfile, expected_mean: np.ndarray, dof: int) -> pd.DataFrame:
    """Profile table with measured and expected statistics per bin."""
    expected_q1, expected_q3 = quartile_overlay(profile, dof, expected_mean)
    return pd.DataFrame(
        {
            "bin_center": profile.centers,
            "mean": profile.mean,
            "q1": profile.q1,
            "q3": profile.q3,
            "count": profile.count,
            "expected_mean": expected_mean,
            "expected_q1": expected_q1,
            "expected_q3": expected_q3,
        },
        columns=PROFILE_COLUMNS,
    )
