"""
Zero-order basis and Hamiltonian matrix containers
"""
from dataclasses import dataclass
from functools import cached_property
from typing import Dict, Tuple

import numpy as np

from qtherm.core.exceptions import BasisLookupError


def freeze_array(array: np.ndarray) -> np.ndarray:
    """Mark an array read-only and return it."""
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class ZeroOrderBasis:
    """Product basis |s>|eps> truncated to an energy window.

    Entries are sorted by zero-order energy, ties broken by (s, eps).
    ``bath_index`` indexes into ``bath_levels``.
    """

    system_index: np.ndarray
    bath_index: np.ndarray
    energies: np.ndarray
    bath_levels: np.ndarray
    system_energies: np.ndarray
    window: Tuple[float, float]

    def __post_init__(self):
        for name in ("system_index", "bath_index", "energies", "bath_levels", "system_energies"):
            freeze_array(getattr(self, name))

    @property
    def dimension(self) -> int:
        """Number of basis entries N."""
        return int(self.energies.shape[0])

    @property
    def n_system_levels(self) -> int:
        return int(self.system_energies.shape[0])

    @property
    def bath_energies(self) -> np.ndarray:
        """Bath energy of every entry."""
        return self.bath_levels[self.bath_index]

    @cached_property
    def _lookup(self) -> Dict[Tuple[int, int], int]:
        return {
            (int(s), int(e)): i
            for i, (s, e) in enumerate(zip(self.system_index.tolist(), self.bath_index.tolist()))
        }

    def index_of(self, s: int, eps: int) -> int:
        """Position of the label (s, eps) in basis order.

        Raises:
            BasisLookupError: If the label lies outside the truncation window
        """
        try:
            return self._lookup[(int(s), int(eps))]
        except KeyError:
            raise BasisLookupError(
                f"Basis label (s={s}, eps={eps}) is outside the truncation window",
                details={"s": int(s), "eps": int(eps), "window": list(self.window)},
            ) from None

    def counts_per_level(self) -> np.ndarray:
        """Number of entries carried by each system level."""
        return np.bincount(self.system_index, minlength=self.n_system_levels)


@dataclass(frozen=True, eq=False)
class HamiltonianMatrix:
    """Real symmetric Hamiltonian in zero-order basis order."""

    values: np.ndarray

    def __post_init__(self):
        freeze_array(self.values)

    @property
    def dimension(self) -> int:
        return int(self.values.shape[0])

    @property
    def diagonal(self) -> np.ndarray:
        return np.diag(self.values)
