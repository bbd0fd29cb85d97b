"""
Spectral decomposition and pure state containers
"""
from dataclasses import dataclass, field
from typing import FrozenSet

import numpy as np

from qtherm.models.basis import ZeroOrderBasis, freeze_array


@dataclass(frozen=True, eq=False)
class SpectralDecomposition:
    """Ascending eigenvalues with real orthonormal eigenvector columns."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def __post_init__(self):
        freeze_array(self.eigenvalues)
        freeze_array(self.eigenvectors)

    @property
    def dimension(self) -> int:
        return int(self.eigenvalues.shape[0])


@dataclass(frozen=True, eq=False)
class PureState:
    """Complex amplitudes over a zero-order basis at time ``t``.

    ``flags`` carries non-fatal conditions raised while building the state,
    e.g. ``"under_resolved"``.
    """

    basis: ZeroOrderBasis
    amplitudes: np.ndarray
    t: float = 0.0
    flags: FrozenSet[str] = field(default_factory=frozenset)

    def __post_init__(self):
        freeze_array(self.amplitudes)

    @property
    def probabilities(self) -> np.ndarray:
        """|c|^2 per basis entry."""
        return np.abs(self.amplitudes) ** 2

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))
