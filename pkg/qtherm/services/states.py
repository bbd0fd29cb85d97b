"""
Initial-state families: random Lorentzian superpositions and single
zero-order basis states.
"""
import logging
import math
from typing import Literal, Optional, Sequence, Union

import numpy as np
import pandas as pd

from qtherm.core.exceptions import ConfigurationError
from qtherm.core.rng import INITIAL_STATE_STREAM, StreamKey, stream
from qtherm.models.basis import ZeroOrderBasis
from qtherm.models.state import PureState

logger = logging.getLogger(__name__)

UNDER_RESOLVED = "under_resolved"
TRUNCATED = "truncated"

# the window should hold this many initial widths' worth of states
MIN_WINDOW_STATES_PER_WIDTH = 100

Deviates = Literal["complex", "real"]


def lorentzian_weights(energies: Union[float, np.ndarray], center: float, gamma: float,
                       rho: float) -> Union[float, np.ndarray]:
    """
    Per-state Lorentzian probability (1/pi) (gamma/rho) / ((E - E0)^2 + gamma^2).

    Summed over states with density ``rho`` the weights integrate to one.
    """
    if gamma < 0 or rho <= 0:
        raise ConfigurationError("Lorentzian needs gamma >= 0 and rho > 0", details={"gamma": gamma, "rho": rho})
    e = np.asarray(energies, dtype=float)
    result = (gamma / rho) / (math.pi * ((e - center) ** 2 + gamma ** 2))
    return float(result) if result.ndim == 0 else result


def local_density(basis: ZeroOrderBasis, system_level: int, energy: float) -> float:
    """Density of states of one system level near ``energy`` from its level spacing."""
    energies = basis.energies[basis.system_index == system_level]
    if energies.shape[0] < 2:
        raise ConfigurationError(f"System level {system_level} has fewer than two states in the window")
    nearest = int(np.argmin(np.abs(energies - energy)))
    lo, hi = max(0, nearest - 5), min(energies.shape[0] - 1, nearest + 5)
    return (hi - lo) / float(energies[hi] - energies[lo])


def complex_deviates(rng: np.random.Generator, size: int) -> np.ndarray:
    """(g + i g') / sqrt(2) with g, g' standard normal; E|z|^2 = 1."""
    real = rng.standard_normal(size)
    imag = rng.standard_normal(size)
    return (real + 1j * imag) / math.sqrt(2.0)


def nearest_basis_index(basis: ZeroOrderBasis, system_level: int, energy: float) -> int:
    """Basis position of the state on ``system_level`` whose zero-order energy is nearest ``energy``."""
    candidates = np.nonzero(basis.system_index == system_level)[0]
    if candidates.shape[0] == 0:
        raise ConfigurationError(f"System level {system_level} has no states in the window")
    return int(candidates[np.argmin(np.abs(basis.energies[candidates] - energy))])


def build_lorentzian_state(basis: ZeroOrderBasis, system_level: int, center: float, gamma0: float,
                           seed: int, *, rho0: Optional[float] = None, deviates: Deviates = "complex",
                           stream_keys: Sequence[StreamKey] = ()) -> PureState:
    """
    Random Lorentzian superposition on one system level.

    Amplitudes are deviates times sqrt(L(E)) on the states of
    ``system_level``, zero elsewhere, then renormalized to one over the
    truncated window.

    Args:
        basis: Zero-order basis
        system_level: System level carrying the state
        center: Envelope center E0
        gamma0: Half-width at half maximum, > 0
        seed: Master seed
        rho0: Density of the system level's states; estimated from the basis when omitted
        deviates: "complex" or "real" amplitude fluctuations
        stream_keys: Extra keys appended to the initial-state stream path

    Returns:
        PureState with flag "under_resolved" when gamma0 * rho0 < 1 and
        "truncated" when the window holds fewer than 100 * gamma0 * rho0 states
    """
    if gamma0 <= 0:
        raise ConfigurationError("Lorentzian width gamma0 must be positive", details={"gamma0": gamma0})
    if not 0 <= system_level < basis.n_system_levels:
        raise ConfigurationError(f"System level {system_level} outside 0..{basis.n_system_levels - 1}")
    if rho0 is None:
        rho0 = local_density(basis, system_level, center)

    rng = stream(seed, INITIAL_STATE_STREAM, *stream_keys)
    members = np.nonzero(basis.system_index == system_level)[0]
    envelope = np.sqrt(lorentzian_weights(basis.energies[members], center, gamma0, rho0))
    if deviates == "complex":
        draws = complex_deviates(rng, members.shape[0])
    elif deviates == "real":
        draws = rng.standard_normal(members.shape[0]).astype(complex)
    else:
        raise ConfigurationError(f"Unknown deviate type {deviates!r}")

    amplitudes = np.zeros(basis.dimension, dtype=complex)
    amplitudes[members] = draws * envelope
    norm = np.linalg.norm(amplitudes)
    if norm == 0:
        raise ConfigurationError("Lorentzian state has zero weight inside the window")
    amplitudes /= norm

    flags = set()
    resolution = gamma0 * rho0
    if resolution < 1:
        flags.add(UNDER_RESOLVED)
        logger.warning(f"Lorentzian under-resolved: gamma0*rho0={resolution:.3g} < 1")
    if members.shape[0] < min(MIN_WINDOW_STATES_PER_WIDTH * resolution, basis.dimension):
        flags.add(TRUNCATED)
        logger.warning(
            f"Window holds {members.shape[0]} states on level {system_level}, "
            f"fewer than {MIN_WINDOW_STATES_PER_WIDTH}*gamma0*rho0={MIN_WINDOW_STATES_PER_WIDTH * resolution:.0f}"
        )
    return PureState(basis=basis, amplitudes=amplitudes, t=0.0, flags=frozenset(flags))


def build_basis_state(basis: ZeroOrderBasis, system_level: int, bath_index: int) -> PureState:
    """
    Single zero-order basis state |s>|eps>.

    Raises:
        BasisLookupError: If the label lies outside the truncation window
    """
    amplitudes = np.zeros(basis.dimension, dtype=complex)
    amplitudes[basis.index_of(system_level, bath_index)] = 1.0
    return PureState(basis=basis, amplitudes=amplitudes, t=0.0)


def export_state_csv(state: PureState) -> pd.DataFrame:
    """Amplitudes as a table with columns (s, eps, E_zero, re, im)."""
    basis = state.basis
    return pd.DataFrame(
        {
            "s": basis.system_index,
            "eps": basis.bath_index,
            "E_zero": basis.energies,
            "re": state.amplitudes.real,
            "im": state.amplitudes.imag,
        }
    )
