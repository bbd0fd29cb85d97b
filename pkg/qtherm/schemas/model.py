"""
Model specification schema: all physical and numerical parameters of the
system-bath model
"""
import json
from typing import Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator


class ModelSpec(BaseModel):
    """Physical and numerical parameters of the system-bath model.

    Energies are in model energy units with the Boltzmann constant set to 1.
    The JSON form uses exactly these field names; unknown fields are rejected.
    """

    model_config = ConfigDict(extra="forbid", frozen=True)

    temperature: float = Field(..., gt=0, description="Bath temperature T")
    bath_prefactor: float = Field(..., gt=0, description="Bath states per unit energy at E=0 (A)")
    coupling: float = Field(..., ge=0, description="Coupling strength k")
    n_system_levels: int = Field(default=3, ge=1, description="Number of system levels")
    level_spacing: float = Field(default=1.0, gt=0, description="System level spacing, E_s = s * spacing")
    center_energy: float = Field(..., description="Central total energy E0")
    window_half_width: Optional[float] = Field(
        default=None,
        gt=0,
        description="Half-width W of the zero-order energy window; resolved from settings when null",
    )
    seed: int = Field(default=0, ge=0, description="Seed of the coupling realization")

    @model_validator(mode="after")
    def validate_window(self) -> "ModelSpec":
        """Bath energies inside the window must be non-negative."""
        if self.window_half_width is not None and self.center_energy - self.window_half_width < 0:
            raise ValueError(
                f"center_energy - window_half_width must be >= 0, got "
                f"{self.center_energy} - {self.window_half_width}"
            )
        if self.center_energy < self.max_system_energy:
            raise ValueError(
                f"center_energy {self.center_energy} lies below the highest system level "
                f"{self.max_system_energy}"
            )
        return self

    @property
    def system_energies(self) -> np.ndarray:
        """Zero-order system energies E_s = s * spacing."""
        return np.arange(self.n_system_levels, dtype=float) * self.level_spacing

    @property
    def max_system_energy(self) -> float:
        """Energy of the highest system level."""
        return (self.n_system_levels - 1) * self.level_spacing

    def canonical_json(self) -> str:
        """Key-sorted compact JSON used for content hashing."""
        return json.dumps(self.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))
