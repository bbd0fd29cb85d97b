"""
Closed-form predictions: Lorentzian and master entropies, excess entropy,
envelope widths and the fluctuation constant g0.
"""
import logging
import math
from typing import Iterable, Optional, Tuple

import numpy as np
import pandas as pd
from scipy import integrate, optimize, special

from qtherm.core.rng import MONTE_CARLO_STREAM, stream
from qtherm.schemas.results import MasterPrediction

logger = logging.getLogger(__name__)

EULER_GAMMA = float(np.euler_gamma)
G0 = 1.0 - EULER_GAMMA

PREDICTION_COLUMNS = ["gamma0", "rho0", "rho_f", "k", "S_pred_initial", "S_pred_final", "dSx_pred", "regime"]


def g0_constant() -> float:
    """<|g|^2 ln |g|^2> for a unit complex Gaussian deviate: 1 - Euler-Mascheroni."""
    return G0


def fluctuation_correction(dof: int = 2) -> float:
    """
    <x ln x> for x = chi^2_dof / dof (unit mean).

    dof=2 gives g0 for complex deviates; dof=1 gives psi(3/2) + ln 2 for real ones.
    """
    if dof < 1:
        raise ValueError(f"dof must be >= 1, got {dof}")
    half = 0.5 * dof
    return float(special.digamma(half + 1.0) - math.log(half))


def g0_monte_carlo(n_samples: int = 10_000_000, seed: int = 0,
                   chunk_size: int = 1_000_000) -> Tuple[float, float]:
    """
    Sampling estimate of <|g|^2 ln |g|^2> for g = (g' + i g'')/sqrt(2).

    Returns:
        (estimate, standard error)
    """
    rng = stream(seed, MONTE_CARLO_STREAM)
    total, total_sq, done = 0.0, 0.0, 0
    while done < n_samples:
        size = min(chunk_size, n_samples - done)
        x = 0.5 * (rng.standard_normal(size) ** 2 + rng.standard_normal(size) ** 2)
        values = -special.entr(x)
        total += float(values.sum())
        total_sq += float(np.dot(values, values))
        done += size
    mean = total / n_samples
    variance = max(total_sq / n_samples - mean ** 2, 0.0)
    return mean, math.sqrt(variance / n_samples)


def lorentzian_entropy(gamma: float, rho: float, dof: int = 2) -> float:
    """
    Entropy ln(4 pi gamma rho) - g0 of a randomly filled Lorentzian envelope.

    With ``dof=1`` the correction for real deviates replaces g0.
    """
    if gamma * rho <= 0:
        raise ValueError(f"gamma*rho must be positive, got {gamma * rho}")
    return math.log(4.0 * math.pi * gamma * rho) - fluctuation_correction(dof)


def regime_threshold(rho: float) -> float:
    """Width below which the Lorentzian entropy is clamped to zero: e^g0 / (4 pi rho)."""
    return math.exp(G0) / (4.0 * math.pi * rho)


def is_resolved(gamma: float, rho: float) -> bool:
    return gamma >= regime_threshold(rho)


def master_entropy(gamma: float, rho: float) -> float:
    """Lorentzian entropy above the regime threshold, zero below it."""
    if gamma < 0 or rho <= 0:
        raise ValueError("master_entropy needs gamma >= 0 and rho > 0")
    if gamma == 0 or not is_resolved(gamma, rho):
        return 0.0
    return lorentzian_entropy(gamma, rho)


def spreading_width(k: float, rho_f: float) -> float:
    """Width 2 pi k^2 rho_f acquired by any envelope during equilibration."""
    return 2.0 * math.pi * k ** 2 * rho_f


def final_width(gamma0: float, k: float, rho_f: float) -> float:
    return gamma0 + spreading_width(k, rho_f)


def eigenstate_width(k: float, rho: float) -> float:
    """Eigenstate envelope half-width pi k^2 rho."""
    return math.pi * k ** 2 * rho


def evolved_width(k: float, rho_f: float) -> float:
    """Evolved basis-state half-width, twice the eigenstate width."""
    return 2.0 * eigenstate_width(k, rho_f)


def max_excess(rho0: float, rho_f: float, k: float) -> float:
    """Excess entropy of an initial basis state: ln(8 pi^2 k^2 rho_f rho0) - g0; 0 without coupling."""
    if k == 0:
        return 0.0
    return math.log(8.0 * math.pi ** 2 * k ** 2 * rho_f * rho0) - G0


def master_excess(gamma0: float, rho0: float, rho_f: float, k: float) -> float:
    """
    Excess entropy production predicted for an initial width.

    ln(gamma_f / gamma0) when gamma0 is resolved on the initial density,
    the basis-state maximum otherwise. Use ``is_resolved(gamma0, rho0)``
    or ``master_prediction`` for the regime.
    """
    if gamma0 > 0 and is_resolved(gamma0, rho0):
        return math.log(final_width(gamma0, k, rho_f) / gamma0)
    return max_excess(rho0, rho_f, k)


def classical_delta_s(rho0: float, rho_f: float) -> float:
    """Microcanonical entropy change ln(rho_f / rho0)."""
    if rho0 <= 0 or rho_f <= 0:
        raise ValueError("Densities must be positive")
    return math.log(rho_f / rho0)


def heuristic_env_entropy_change(q: float, temperature: float, dsx: float) -> float:
    """Environment entropy change Q/T + dS^x."""
    return q / temperature + dsx


def master_prediction(gamma0: float, rho0: float, rho_f: float, k: float) -> MasterPrediction:
    """All closed-form predictions for one initial width."""
    gamma_f = final_width(gamma0, k, rho_f)
    resolved = gamma0 > 0 and is_resolved(gamma0, rho0)
    return MasterPrediction(
        gamma0=gamma0,
        gamma_f=gamma_f,
        rho0=rho0,
        rho_f=rho_f,
        coupling=k,
        s_l_initial=lorentzian_entropy(gamma0, rho0) if gamma0 > 0 else None,
        s_l_final=lorentzian_entropy(gamma_f, rho_f) if gamma_f > 0 else None,
        s_initial=master_entropy(gamma0, rho0),
        s_final=master_entropy(gamma_f, rho_f),
        ds_classical=classical_delta_s(rho0, rho_f),
        dsx_pred=master_excess(gamma0, rho0, rho_f, k),
        dsx_max=max_excess(rho0, rho_f, k),
        regime="resolved" if resolved else "clamped",
    )


def prediction_table(predictions: Iterable[MasterPrediction]) -> pd.DataFrame:
    """Prediction overlay table with one row per MasterPrediction."""
    rows = [
        {
            "gamma0": p.gamma0,
            "rho0": p.rho0,
            "rho_f": p.rho_f,
            "k": p.coupling,
            "S_pred_initial": p.s_initial,
            "S_pred_final": p.s_final,
            "dSx_pred": p.dsx_pred,
            "regime": p.regime,
        }
        for p in predictions
    ]
    return pd.DataFrame(rows, columns=PREDICTION_COLUMNS)


def _unit_lorentzian(x: float, gamma: float) -> float:
    return gamma / (math.pi * (x * x + gamma * gamma))


def convolution_half_width(gamma1: float, gamma2: float, scale: Optional[float] = None) -> float:
    """
    Half-width at half maximum of the convolution of two unit Lorentzians.

    Evaluated by quadrature and root finding; analytically gamma1 + gamma2.
    """
    if gamma1 <= 0 or gamma2 <= 0:
        raise ValueError("Widths must be positive")
    scale = scale or (gamma1 + gamma2)

    def convolved(x: float) -> float:
        def integrand(y: float) -> float:
            return _unit_lorentzian(y, gamma1) * _unit_lorentzian(x - y, gamma2)

        total = 0.0
        # split at both peaks so quad sees each one
        for lo, hi in ((-np.inf, min(0.0, x)), (min(0.0, x), max(0.0, x)), (max(0.0, x), np.inf)):
            if lo < hi:
                total += integrate.quad(integrand, lo, hi, limit=200, epsabs=0.0, epsrel=1e-11)[0]
        return total

    half_peak = 0.5 * convolved(0.0)
    return float(optimize.brentq(lambda x: convolved(x) - half_peak, 1e-12 * scale, 20.0 * scale, xtol=1e-14 * scale))
