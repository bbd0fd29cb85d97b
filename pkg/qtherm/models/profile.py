"""
Energy-binned amplitude profile
"""
from dataclasses import dataclass

import numpy as np

from qtherm.models.basis import freeze_array


@dataclass(frozen=True, eq=False)
class BinnedProfile:
    """Per-bin statistics of squared amplitudes on equal-width energy bins.

    Quartiles and means of empty bins are NaN.
    """

    edges: np.ndarray
    mean: np.ndarray
    q1: np.ndarray
    median: np.ndarray
    q3: np.ndarray
    count: np.ndarray
    degenerate: bool = False

    def __post_init__(self):
        for name in ("edges", "mean", "q1", "median", "q3", "count"):
            freeze_array(getattr(self, name))

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.edges[:-1] + self.edges[1:])

    @property
    def n_bins(self) -> int:
        return int(self.count.shape[0])

    @property
    def empty(self) -> np.ndarray:
        """Mask of bins without samples."""
        return self.count == 0

    @property
    def total_weight(self) -> float:
        """Sum of mean * count over populated bins."""
        populated = ~self.empty
        return float(np.sum(self.mean[populated] * self.count[populated]))
