"""
Experiment configuration and run manifest schemas
"""
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from qtherm.schemas.model import ModelSpec


class LorentzianFamily(BaseModel):
    """Random Lorentzian superposition on one system level."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    kind: Literal["lorentzian"] = "lorentzian"
    gamma0: float = Field(..., gt=0, description="Initial half-width at half maximum")
    system_level: int = Field(default=0, ge=0, description="System level carrying the state")
    deviates: Literal["complex", "real"] = Field(default="complex", description="Amplitude deviate type")


class BasisStateFamily(BaseModel):
    """Single zero-order basis state |s>|eps>."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    kind: Literal["basis_state"] = "basis_state"
    system_level: int = Field(default=0, ge=0, description="System level of the basis state")
    bath_index: Optional[int] = Field(
        default=None,
        ge=0,
        description="Bath level index; null picks the level whose zero-order energy is nearest E0",
    )


InitialFamily = Union[LorentzianFamily, BasisStateFamily]


class TimeGrid(BaseModel):
    """Sampling times. A null t_max resolves to twice the equilibration time."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    t_max: Optional[float] = Field(default=None, gt=0, description="Last sampling time")
    n_samples: Optional[int] = Field(default=None, ge=2, description="Number of samples including t=0")


class BinSettings(BaseModel):
    """Binning of amplitude profiles around the envelope center."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    n_bins: Optional[int] = Field(default=None, ge=10, description="Fixed bin count; null uses the width rule")
    fit_window_widths: float = Field(
        default=8.0, gt=0, description="Profiles cover center +/- this many predicted half-widths"
    )


class ExperimentConfig(BaseModel):
    """Everything needed to reproduce one experiment."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    name: str = Field(default="run", min_length=1, description="Experiment name used for the run directory")
    model: ModelSpec
    initial_state: InitialFamily = Field(default_factory=BasisStateFamily, discriminator="kind")
    time_grid: TimeGrid = Field(default_factory=TimeGrid)
    n_seeds: int = Field(default=1, ge=1, description="Independent realizations per experiment")
    output_dir: Optional[Path] = Field(default=None, description="Run directory; defaults to runs/<name>")
    bins: BinSettings = Field(default_factory=BinSettings)
    gamma0_grid: Optional[List[float]] = Field(default=None, description="Initial widths for entropy curves")
    sweep_steps: int = Field(default=5, ge=3, description="Coupling halvings in the limit sweep")
    sweep_gamma0: float = Field(default=0.0625, gt=0, description="Lorentzian width used by the limit sweep")
    export_states: bool = Field(default=False, description="Write initial and final amplitudes as CSV")

    @field_validator("name")
    @classmethod
    def validate_name(cls, v):
        """Names become directory names."""
        v = v.strip()
        if not v or any(ch in v for ch in "/\\"):
            raise ValueError("name must be a non-empty string without path separators")
        return v

    @field_validator("gamma0_grid")
    @classmethod
    def validate_gamma0_grid(cls, v):
        """Widths must be non-negative; 0 stands for the basis-state limit."""
        if v is not None:
            if not v:
                raise ValueError("gamma0_grid must not be empty")
            if any(g < 0 for g in v):
                raise ValueError("gamma0_grid entries must be >= 0")
        return v

    @model_validator(mode="after")
    def validate_system_level(self) -> "ExperimentConfig":
        """Initial system level must exist in the model."""
        if self.initial_state.system_level >= self.model.n_system_levels:
            raise ValueError(
                f"initial system_level {self.initial_state.system_level} outside "
                f"0..{self.model.n_system_levels - 1}"
            )
        return self

    @property
    def gamma0(self) -> float:
        """Initial width; 0 for a basis state."""
        if isinstance(self.initial_state, LorentzianFamily):
            return self.initial_state.gamma0
        return 0.0

    def resolved_output_dir(self) -> Path:
        """Directory the run writes into."""
        return self.output_dir if self.output_dir is not None else Path("runs") / self.name

    def with_seed(self, seed: int) -> "ExperimentConfig":
        """Copy with a different master seed."""
        return self.model_copy(update={"model": self.model.model_copy(update={"seed": seed})})


class DerivedQuantities(BaseModel):
    """Model quantities resolved before a run."""

    dimension: int = Field(..., description="Zero-order basis dimension N")
    window_half_width: float = Field(..., description="Resolved window half-width W")
    rho0: float = Field(..., description="Initial density of states per system level")
    rho_f: float = Field(..., description="Total density of states at E0")
    gamma0: float = Field(..., description="Initial half-width")
    gamma_spread: float = Field(..., description="Spreading width 2 pi k^2 rho_f")
    gamma_f: float = Field(..., description="Predicted final half-width")
    eigenstate_width: float = Field(..., description="Eigenstate half-width pi k^2 rho_f")
    t_eq: Optional[float] = Field(None, description="Equilibration time; null without coupling")


class RunManifest(BaseModel):
    """Provenance record written next to every run's outputs."""

    kind: Literal["run", "curve", "sweep"] = "run"
    config: ExperimentConfig
    derived: Optional[DerivedQuantities] = None
    code_version: str
    settings: Dict[str, Any] = Field(default_factory=dict, description="Runtime settings in effect")
    seeds: List[int] = Field(default_factory=list)
    started_at: datetime
    wall_clock_seconds: float = 0.0
    outputs: Dict[str, str] = Field(default_factory=dict, description="File name to sha256 digest")
    status: Literal["ok", "failed"] = "ok"
    error: Optional[Dict[str, Any]] = None
