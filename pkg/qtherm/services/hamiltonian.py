"""
System-bath model construction: densities of states, discretized bath
spectrum, zero-order basis and the coupled Hamiltonian.
"""
import logging
import math
from typing import Optional, Tuple, Union

import numpy as np

from qtherm.core.config import Settings, get_settings
from qtherm.core.exceptions import ConfigurationError, ResourceError
from qtherm.core.rng import HAMILTONIAN_STREAM, stream
from qtherm.models.basis import HamiltonianMatrix, ZeroOrderBasis
from qtherm.schemas.experiment import DerivedQuantities
from qtherm.schemas.model import ModelSpec

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]


def bath_density(energy: ArrayLike, spec: ModelSpec) -> ArrayLike:
    """
    Bath density of states A * exp(E/T).

    Args:
        energy: Bath energy (scalar or array), must be >= 0
        spec: Model specification

    Returns:
        States per unit energy
    """
    e = np.asarray(energy, dtype=float)
    if np.any(e < 0):
        raise ConfigurationError("Bath energies must be non-negative", details={"min_energy": float(e.min())})
    result = spec.bath_prefactor * np.exp(e / spec.temperature)
    return float(result) if result.ndim == 0 else result


def total_density(energy: ArrayLike, spec: ModelSpec) -> ArrayLike:
    """
    Total density of states summed over the system levels.

    Raises:
        ConfigurationError: If the energy lies below the highest system level
    """
    e = np.asarray(energy, dtype=float)
    if np.any(e < spec.max_system_energy):
        raise ConfigurationError(
            "Total density requested below the highest system level",
            details={"energy": float(e.min()), "max_system_energy": spec.max_system_energy},
        )
    result = sum(bath_density(e - e_s, spec) for e_s in spec.system_energies)
    return float(result) if np.ndim(result) == 0 else result


def initial_density(spec: ModelSpec, system_level: int = 0, energy: Optional[float] = None) -> float:
    """Bath density paired with one system level at total energy E (default E0)."""
    e = spec.center_energy if energy is None else energy
    return bath_density(e - spec.system_energies[system_level], spec)


def final_density(spec: ModelSpec, energy: Optional[float] = None) -> float:
    """Total density at total energy E (default E0)."""
    return total_density(spec.center_energy if energy is None else energy, spec)


def bath_prefactor_for(rho_f: float, center_energy: float, temperature: float,
                       n_system_levels: int = 3, level_spacing: float = 1.0) -> float:
    """Prefactor A giving total density ``rho_f`` at ``center_energy``."""
    factors = np.exp(-np.arange(n_system_levels) * level_spacing / temperature)
    return rho_f / (math.exp(center_energy / temperature) * float(factors.sum()))


def resolve_window_half_width(spec: ModelSpec, gamma0: float = 0.0,
                              settings: Optional[Settings] = None) -> float:
    """
    Window half-width W, explicit or from the predicted final width.

    Unset W resolves to max(min_window_half_width, window_widths * gamma_f)
    and is capped so that E0 - W stays non-negative.
    """
    if spec.window_half_width is not None:
        return spec.window_half_width
    settings = settings or get_settings()
    gamma_f = gamma0 + 2.0 * math.pi * spec.coupling ** 2 * final_density(spec)
    width = max(settings.min_window_half_width, settings.window_widths * gamma_f)
    return min(width, spec.center_energy)


def resolve_spec(spec: ModelSpec, gamma0: float = 0.0, settings: Optional[Settings] = None) -> ModelSpec:
    """Copy of ``spec`` with the window half-width filled in."""
    if spec.window_half_width is not None:
        return spec
    return spec.model_copy(update={"window_half_width": resolve_window_half_width(spec, gamma0, settings)})


def bath_window(spec: ModelSpec, settings: Optional[Settings] = None) -> Tuple[float, float]:
    """Bath energy range needed to populate the zero-order window for every system level."""
    half_width = resolve_window_half_width(spec, settings=settings)
    low = max(0.0, spec.center_energy - half_width - spec.max_system_energy)
    return low, spec.center_energy + half_width


def cumulative_bath_count(energy: ArrayLike, spec: ModelSpec, low: float) -> ArrayLike:
    """Integrated bath density A*T*(exp(E/T) - exp(low/T))."""
    t = spec.temperature
    return spec.bath_prefactor * t * (np.exp(np.asarray(energy, dtype=float) / t) - math.exp(low / t))


def build_bath_levels(spec: ModelSpec, settings: Optional[Settings] = None) -> np.ndarray:
    """
    Discretize the bath continuum by mid-point loading of the cumulative count.

    Level n (1-based) sits where the integrated density equals n - 1/2, so the
    count in any subinterval matches the integral to within one level.

    Raises:
        ConfigurationError: If the window holds fewer levels than the configured minimum
    """
    settings = settings or get_settings()
    low, high = bath_window(spec, settings)
    total = float(cumulative_bath_count(high, spec, low))
    n_levels = int(math.floor(total + 0.5))
    if n_levels < settings.min_bath_levels:
        raise ConfigurationError(
            f"Bath window [{low:.6g}, {high:.6g}] holds {n_levels} levels, "
            f"need at least {settings.min_bath_levels}",
            details={"levels": n_levels, "low": low, "high": high},
        )
    t = spec.temperature
    counts = np.arange(1, n_levels + 1, dtype=float) - 0.5
    # inverse of the cumulative count, written to stay accurate for large exp(low/T)
    levels = low + t * np.log1p(counts / (spec.bath_prefactor * t * math.exp(low / t)))
    return levels


def build_basis(spec: ModelSpec, settings: Optional[Settings] = None) -> ZeroOrderBasis:
    """
    Zero-order basis |s>|eps> with E_s + eps inside [E0 - W, E0 + W].

    No dimension cap is applied; initial-state-only experiments use large
    windows without ever forming a Hamiltonian.
    """
    settings = settings or get_settings()
    half_width = resolve_window_half_width(spec, settings=settings)
    levels = build_bath_levels(spec, settings)
    e_low, e_high = spec.center_energy - half_width, spec.center_energy + half_width

    system_parts, bath_parts, energy_parts = [], [], []
    for s, e_s in enumerate(spec.system_energies):
        energies = e_s + levels
        keep = np.nonzero((energies >= e_low) & (energies <= e_high))[0]
        system_parts.append(np.full(keep.shape[0], s, dtype=np.int64))
        bath_parts.append(keep.astype(np.int64))
        energy_parts.append(energies[keep])

    system_index = np.concatenate(system_parts)
    bath_index = np.concatenate(bath_parts)
    energies = np.concatenate(energy_parts)
    order = np.lexsort((bath_index, system_index, energies))

    basis = ZeroOrderBasis(
        system_index=system_index[order],
        bath_index=bath_index[order],
        energies=energies[order],
        bath_levels=levels,
        system_energies=spec.system_energies,
        window=(e_low, e_high),
    )
    logger.debug(f"Built zero-order basis: N={basis.dimension}, window=[{e_low:.6g}, {e_high:.6g}]")
    return basis


def build_hamiltonian(spec: ModelSpec,
                      settings: Optional[Settings] = None) -> Tuple[ZeroOrderBasis, HamiltonianMatrix]:
    """
    Build the basis and the coupled Hamiltonian H = diag(E_zero) + k * G.

    G is a real symmetric matrix of standard normal deviates with zero
    diagonal. The upper triangle is drawn row by row from the Hamiltonian
    stream of ``spec.seed`` and mirrored.

    Raises:
        ResourceError: If N exceeds the configured maximum dimension
    """
    settings = settings or get_settings()
    basis = build_basis(spec, settings)
    n = basis.dimension
    if n > settings.max_dimension:
        raise ResourceError(
            f"Hamiltonian dimension {n} exceeds the configured maximum {settings.max_dimension}",
            details={"dimension": n, "max_dimension": settings.max_dimension},
        )

    rng = stream(spec.seed, HAMILTONIAN_STREAM)
    values = np.zeros((n, n), dtype=float)
    for i in range(n - 1):
        row = spec.coupling * rng.standard_normal(n - i - 1)
        values[i, i + 1:] = row
        values[i + 1:, i] = row
    values[np.diag_indices(n)] = basis.energies

    logger.info(f"Built Hamiltonian: N={n}, k={spec.coupling:.6g}, seed={spec.seed}")
    return basis, HamiltonianMatrix(values=values)


def derived_quantities(spec: ModelSpec, gamma0: float = 0.0,
                       settings: Optional[Settings] = None) -> DerivedQuantities:
    """Resolve window, dimension, densities and predicted widths for a model."""
    settings = settings or get_settings()
    resolved = resolve_spec(spec, gamma0, settings)
    rho_f = final_density(resolved)
    gamma_spread = 2.0 * math.pi * resolved.coupling ** 2 * rho_f
    gamma_f = gamma0 + gamma_spread
    return DerivedQuantities(
        dimension=build_basis(resolved, settings).dimension,
        window_half_width=resolved.window_half_width,
        rho0=initial_density(resolved),
        rho_f=rho_f,
        gamma0=gamma0,
        gamma_spread=gamma_spread,
        gamma_f=gamma_f,
        eigenstate_width=0.5 * gamma_spread,
        t_eq=settings.equilibration_factor / gamma_spread if gamma_spread > 0 else None,
    )
