"""
Exact diagonalization and propagation of pure states.
"""
import logging
import math
import time
from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence

import numpy as np
import scipy.linalg

from qtherm.core.config import Settings, get_settings
from qtherm.core.exceptions import CacheIntegrityError, ConfigurationError, NumericError
from qtherm.models.basis import HamiltonianMatrix, ZeroOrderBasis, freeze_array
from qtherm.models.state import PureState, SpectralDecomposition
from qtherm.schemas.model import ModelSpec
from qtherm.services.hamiltonian import final_density
from qtherm.services.persistence import SpectralCache

logger = logging.getLogger(__name__)

ORTHONORMALITY_TOLERANCE = 1e-9
RECONSTRUCTION_TOLERANCE = 1e-8


@dataclass(frozen=True, eq=False)
class Envelope:
    """Squared eigenvector coefficients paired with zero-order energies."""

    energies: np.ndarray
    weights: np.ndarray
    reference_energy: float

    def __post_init__(self):
        freeze_array(self.energies)
        freeze_array(self.weights)


def _fix_signs(vectors: np.ndarray) -> np.ndarray:
    """Make the largest-magnitude component of every column positive."""
    pivots = np.argmax(np.abs(vectors), axis=0)
    signs = np.sign(vectors[pivots, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1.0
    return vectors * signs


def check_decomposition(hamiltonian: HamiltonianMatrix, decomp: SpectralDecomposition) -> None:
    """
    Verify orthonormality and reconstruction of a decomposition.

    Raises:
        NumericError: If either residual exceeds its tolerance
    """
    vectors = decomp.eigenvectors
    n = decomp.dimension
    ortho = float(np.max(np.abs(vectors.T @ vectors - np.eye(n))))
    scale = float(np.max(np.abs(decomp.eigenvalues))) or 1.0
    recon = float(np.max(np.abs((vectors * decomp.eigenvalues) @ vectors.T - hamiltonian.values)))
    if ortho > ORTHONORMALITY_TOLERANCE or recon > RECONSTRUCTION_TOLERANCE * scale:
        raise NumericError(
            "Eigendecomposition failed its residual checks",
            details={"orthonormality": ortho, "reconstruction": recon, "norm": scale},
        )
    logger.debug(f"Decomposition residuals: orthonormality={ortho:.3e}, reconstruction={recon:.3e}")


def diagonalize(hamiltonian: HamiltonianMatrix, check: bool = True) -> SpectralDecomposition:
    """
    Full dense symmetric eigendecomposition.

    Eigenvalues are ascending with ties kept in solver order; every
    eigenvector column has its largest-magnitude component positive.

    Args:
        hamiltonian: Real symmetric matrix
        check: Verify orthonormality and reconstruction residuals

    Returns:
        SpectralDecomposition

    Raises:
        NumericError: If the eigensolver does not converge or the matrix is not finite
    """
    values = hamiltonian.values
    if not np.all(np.isfinite(values)):
        raise NumericError("Hamiltonian contains non-finite entries")

    logger.info(f"Diagonalizing N={hamiltonian.dimension}")
    started = time.perf_counter()
    try:
        eigenvalues, eigenvectors = scipy.linalg.eigh(values, check_finite=False)
    except scipy.linalg.LinAlgError as e:
        raise NumericError(
            f"Eigensolver did not converge: {e}",
            details={"dimension": hamiltonian.dimension, "solver_message": str(e)},
        ) from e

    order = np.argsort(eigenvalues, kind="stable")
    decomp = SpectralDecomposition(
        eigenvalues=eigenvalues[order],
        eigenvectors=_fix_signs(eigenvectors[:, order]),
    )
    logger.info(f"Diagonalized N={hamiltonian.dimension} in {time.perf_counter() - started:.2f}s")

    if check:
        check_decomposition(hamiltonian, decomp)
    return decomp


def decompose(spec: ModelSpec, hamiltonian: HamiltonianMatrix,
              settings: Optional[Settings] = None) -> SpectralDecomposition:
    """
    Diagonalize through the spectral cache when one is configured.

    A corrupted or mismatched cache entry is logged and recomputed.
    """
    settings = settings or get_settings()
    if settings.cache_dir is None:
        return diagonalize(hamiltonian)

    cache = SpectralCache(settings.cache_dir)
    try:
        cached = cache.load(spec, hamiltonian.dimension)
    except CacheIntegrityError as e:
        logger.warning(f"Discarding spectral cache entry: {e.message}")
        cached = None
    if cached is not None:
        return cached

    decomp = diagonalize(hamiltonian)
    cache.store(spec, decomp)
    return decomp


def propagate(state0: PureState, decomp: SpectralDecomposition, t: float) -> PureState:
    """
    Evolve a state for time ``t`` under the decomposed Hamiltonian.

    psi(t) = V exp(-i E t) V^T psi(0); t = 0 returns ``state0`` itself.
    """
    if t == 0:
        return state0
    vectors = decomp.eigenvectors
    coefficients = vectors.T @ state0.amplitudes
    evolved = vectors @ (np.exp(-1j * decomp.eigenvalues * t) * coefficients)
    return PureState(basis=state0.basis, amplitudes=evolved, t=state0.t + t, flags=state0.flags)


def propagate_many(state0: PureState, decomp: SpectralDecomposition,
                   times: Sequence[float]) -> List[PureState]:
    """
    Evolve a state to several elapsed times with one eigenbasis expansion.

    Returns:
        One PureState per entry of ``times``, in order
    """
    times = np.asarray(times, dtype=float)
    vectors = decomp.eigenvectors
    coefficients = vectors.T @ state0.amplitudes
    phased = np.exp(-1j * np.outer(decomp.eigenvalues, times)) * coefficients[:, None]
    # real eigenvectors: two real products instead of one complex one
    evolved = (vectors @ phased.real) + 1j * (vectors @ phased.imag)

    states = []
    for j, t in enumerate(times):
        if t == 0:
            states.append(state0)
        else:
            states.append(PureState(basis=state0.basis, amplitudes=evolved[:, j].copy(),
                                    t=state0.t + float(t), flags=state0.flags))
    return states


def energy_expectation(state: PureState, hamiltonian: HamiltonianMatrix) -> float:
    """<psi|H|psi> for a real symmetric H."""
    c = state.amplitudes
    return float(np.real(np.vdot(c, hamiltonian.values @ c)))


def equilibration_time(spec: ModelSpec, settings: Optional[Settings] = None) -> float:
    """
    Default sampling time C / gamma_f for an initial basis state.

    gamma_f = 2 pi k^2 rho_f(E0) and C is the configured equilibration factor.

    Raises:
        ConfigurationError: If the coupling is zero
    """
    settings = settings or get_settings()
    if spec.coupling == 0:
        raise ConfigurationError("Equilibration time is undefined without coupling (k = 0)")
    gamma_f = 2.0 * math.pi * spec.coupling ** 2 * final_density(spec)
    return settings.equilibration_factor / gamma_f


def _check_index(decomp: SpectralDecomposition, index: int) -> int:
    if not 0 <= index < decomp.dimension:
        raise ConfigurationError(
            f"Eigenstate index {index} outside 0..{decomp.dimension - 1}",
            details={"index": index, "dimension": decomp.dimension},
        )
    return int(index)


def eigenstate_envelope(decomp: SpectralDecomposition, basis: ZeroOrderBasis, index: int) -> Envelope:
    """Zero-order energies and squared coefficients of one eigenstate."""
    index = _check_index(decomp, index)
    column = decomp.eigenvectors[:, index]
    return Envelope(
        energies=basis.energies.copy(),
        weights=column ** 2,
        reference_energy=float(decomp.eigenvalues[index]),
    )


def pooled_eigenstate_envelope(decomp: SpectralDecomposition, basis: ZeroOrderBasis,
                               indices: Iterable[int]) -> Envelope:
    """
    Envelopes of several eigenstates on a common axis.

    Energies are offsets E_zero - E_xi, so the pooled envelope is centered
    near zero when the eigenstates are.
    """
    indices = [_check_index(decomp, i) for i in indices]
    if not indices:
        raise ConfigurationError("At least one eigenstate index is required")
    columns = decomp.eigenvectors[:, indices]
    offsets = basis.energies[:, None] - decomp.eigenvalues[indices][None, :]
    return Envelope(
        energies=offsets.T.ravel(),
        weights=(columns ** 2).T.ravel(),
        reference_energy=0.0,
    )


def mid_spectrum_indices(decomp: SpectralDecomposition, center: float, count: int) -> np.ndarray:
    """Indices of the ``count`` eigenvalues nearest ``center``, ascending."""
    count = min(int(count), decomp.dimension)
    nearest = np.argsort(np.abs(decomp.eigenvalues - center), kind="stable")[:count]
    return np.sort(nearest)
