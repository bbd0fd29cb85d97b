"""
Thermodynamic observables of pure states in the zero-order basis:
quantum entropy, its system/environment split, free energy, heat and
excess entropy production.
"""
import logging
from typing import Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.special import entr

from qtherm.models.state import PureState
from qtherm.schemas.results import EntropyBreakdown

logger = logging.getLogger(__name__)

# probabilities below this are treated as exactly zero
PROBABILITY_FLOOR = 1e-300

TIMESERIES_COLUMNS = ["t", "S_univ", "S_sys", "S_env", "F_sys", "Q_cum", "dSx"]


def _clean(probabilities: np.ndarray) -> np.ndarray:
    p = np.asarray(probabilities, dtype=float)
    return np.where(p < PROBABILITY_FLOOR, 0.0, p)


def shannon_entropy(probabilities: np.ndarray) -> float:
    """-sum p ln p in nats with 0 ln 0 = 0."""
    return float(np.sum(entr(_clean(probabilities))))


def entropy_univ(state: PureState) -> float:
    """Quantum entropy -sum |c|^2 ln |c|^2 over the zero-order basis."""
    return shannon_entropy(state.probabilities)


def split_probabilities(probabilities: np.ndarray, system_index: np.ndarray, system_energies: np.ndarray,
                        temperature: float, t: float = 0.0) -> EntropyBreakdown:
    """
    Entropy split of a joint distribution over (s, eps) labels.

    Levels with p_s = 0 contribute nothing to the conditional environment
    entropy.
    """
    p = _clean(probabilities)
    n_levels = system_energies.shape[0]
    p_sys = np.bincount(system_index, weights=p, minlength=n_levels)
    s_sys = shannon_entropy(p_sys)

    occupied = p_sys > 0
    conditional = np.zeros_like(p)
    owner = p_sys[system_index]
    mask = owner > 0
    conditional[mask] = p[mask] / owner[mask]
    per_level = np.bincount(system_index, weights=entr(conditional), minlength=n_levels)
    s_env = float(np.sum(p_sys[occupied] * per_level[occupied]))

    mean_e = float(np.dot(p_sys, system_energies))
    return EntropyBreakdown(
        t=t,
        s_univ=shannon_entropy(p),
        s_sys=s_sys,
        s_env=s_env,
        p_sys=p_sys.tolist(),
        mean_e_sys=mean_e,
        f_sys=mean_e - temperature * s_sys,
    )


def split_entropy(state: PureState, temperature: float) -> EntropyBreakdown:
    """
    Split the quantum entropy into system and conditional environment parts.

    Args:
        state: Normalized pure state
        temperature: Bath temperature used for the system free energy

    Returns:
        EntropyBreakdown with S_univ = S_sys + S_env
    """
    basis = state.basis
    return split_probabilities(state.probabilities, basis.system_index, basis.system_energies,
                               temperature, t=state.t)


def system_distribution(state: PureState) -> np.ndarray:
    """Probability of each system level, p_s = sum_eps |c_{s,eps}|^2."""
    basis = state.basis
    return np.bincount(basis.system_index, weights=state.probabilities, minlength=basis.n_system_levels)


def free_energy(state: PureState, temperature: float) -> float:
    """F_sys = <E_s> - T S_sys with S_sys the Shannon entropy of p_s."""
    p_sys = system_distribution(state)
    return float(np.dot(p_sys, state.basis.system_energies)) - temperature * shannon_entropy(p_sys)


def heat(initial: EntropyBreakdown, final: EntropyBreakdown) -> float:
    """Q = -(change of mean system energy); negative when the system absorbs energy."""
    return initial.mean_e_sys - final.mean_e_sys


def excess_entropy(initial: EntropyBreakdown, final: EntropyBreakdown, temperature: float) -> float:
    """Excess entropy production dS_univ + dF_sys / T."""
    return (final.s_univ - initial.s_univ) + (final.f_sys - initial.f_sys) / temperature


def environment_entropy_change(initial: EntropyBreakdown, final: EntropyBreakdown) -> float:
    """Change of the conditional environment entropy."""
    return final.s_env - initial.s_env


def boltzmann_distribution(system_energies: np.ndarray, temperature: float) -> np.ndarray:
    """Canonical p_s proportional to exp(-E_s / T)."""
    weights = np.exp(-(np.asarray(system_energies, dtype=float) - np.min(system_energies)) / temperature)
    return weights / weights.sum()


def total_variation(p: Sequence[float], q: Sequence[float]) -> float:
    """Total-variation distance 1/2 sum |p - q|."""
    return 0.5 * float(np.sum(np.abs(np.asarray(p, dtype=float) - np.asarray(q, dtype=float))))


def uniform_microcanonical(counts: Sequence[int]) -> Tuple[np.ndarray, np.ndarray]:
    """
    Uniform distribution over sum(counts) states with counts[s] states per system level.

    Returns:
        (probabilities, system_index) ready for ``split_probabilities``
    """
    counts = np.asarray(counts, dtype=np.int64)
    if np.any(counts < 0) or counts.sum() == 0:
        raise ValueError("Multiplicities must be non-negative with a positive total")
    system_index = np.repeat(np.arange(counts.shape[0]), counts)
    probabilities = np.full(system_index.shape[0], 1.0 / counts.sum())
    return probabilities, system_index


def entropy_timeseries(states: Sequence[PureState], temperature: float) -> pd.DataFrame:
    """
    Entropy and heat bookkeeping for a sequence of states.

    Heat and excess entropy are cumulative relative to the first state.

    Returns:
        DataFrame with columns (t, S_univ, S_sys, S_env, F_sys, Q_cum, dSx)
    """
    if not states:
        raise ValueError("At least one state is required")
    breakdowns = [split_entropy(state, temperature) for state in states]
    initial = breakdowns[0]
    rows = []
    for b in breakdowns:
        rows.append(
            {
                "t": b.t,
                "S_univ": b.s_univ,
                "S_sys": b.s_sys,
                "S_env": b.s_env,
                "F_sys": b.f_sys,
                "Q_cum": heat(initial, b),
                "dSx": excess_entropy(initial, b, temperature),
            }
        )
        logger.debug(f"t={b.t:.4g}: S_univ={b.s_univ:.6f}, S_sys={b.s_sys:.6f}, S_env={b.s_env:.6f}")
    return pd.DataFrame(rows, columns=TIMESERIES_COLUMNS)
