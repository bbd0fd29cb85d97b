"""
Result records produced by observables, analytic predictions, fits and verification
"""
from typing import Any, Dict, List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field


class EntropyBreakdown(BaseModel):
    """Entropy split of one pure state in the zero-order basis."""

    model_config = ConfigDict(frozen=True)

    t: float = Field(..., description="Sampling time")
    s_univ: float = Field(..., description="Quantum entropy of the whole state")
    s_sys: float = Field(..., description="Shannon entropy of the system distribution")
    s_env: float = Field(..., description="Conditional environment entropy")
    p_sys: List[float] = Field(..., description="Probability per system level")
    mean_e_sys: float = Field(..., description="Mean system energy")
    f_sys: float = Field(..., description="System free energy")


class MasterPrediction(BaseModel):
    """Closed-form entropy predictions for one initial width."""

    gamma0: float
    gamma_f: float
    rho0: float
    rho_f: float
    coupling: float
    s_l_initial: Optional[float] = Field(None, description="Lorentzian entropy before clamping; null for gamma0=0")
    s_l_final: Optional[float] = Field(None, description="Lorentzian entropy of the final envelope; null when gamma_f=0")
    s_initial: float = Field(..., description="Master entropy of the initial envelope")
    s_final: float = Field(..., description="Master entropy of the final envelope")
    ds_classical: float
    dsx_pred: float
    dsx_max: float
    regime: Literal["resolved", "clamped"]


class LorentzianFit(BaseModel):
    """Weighted least-squares Lorentzian envelope fit."""

    center: float
    width: float = Field(..., gt=0)
    amplitude: float
    offset: Optional[float] = Field(None, description="Envelope center relative to a reference energy")
    residual_norm: float
    stderr_center: Optional[float] = None
    stderr_width: Optional[float] = None
    stderr_amplitude: Optional[float] = None
    n_bins: int
    iterations: int
    converged: bool


class ComponentMoments(BaseModel):
    """Sample moments of one real component."""

    n: int
    mean: float
    variance: float
    skewness: float
    excess_kurtosis: float
    passed: bool


class FluctuationReport(BaseModel):
    """Moment test of rescaled coefficients against the standard normal."""

    components: Dict[str, ComponentMoments]
    passed: bool


class CheckResult(BaseModel):
    """Outcome of one verification check."""

    criterion: int
    name: str
    passed: bool
    measured: Any = None
    expected: Any = None
    tolerance: Optional[float] = None
    details: Dict[str, Any] = Field(default_factory=dict)


class VerificationReport(BaseModel):
    """Machine-readable verification outcome."""

    quick: bool
    master_seeds: List[int]
    checks: List[CheckResult]
    pass_rates: Dict[str, float]
    passed: bool
    wall_clock_seconds: float


class SeedOutcome(BaseModel):
    """Measured and predicted quantities of one realization."""

    seed_index: int
    model_seed: int
    family: Literal["lorentzian", "basis_state"]
    center_energy: float
    initial: EntropyBreakdown
    final: EntropyBreakdown
    heat: float
    ds_univ: float
    ds_env: float
    dsx_final: float
    dsx_plateau: float
    p_sys_plateau: List[float]
    tv_boltzmann: float
    prediction: MasterPrediction
    fit_initial: Optional[LorentzianFit] = None
    fit_final: Optional[LorentzianFit] = None
    fluctuation_final: Optional[FluctuationReport] = None
    flags: List[str] = Field(default_factory=list)


class RunSummary(BaseModel):
    """Contents of fits.json: per-seed outcomes and seed averages."""

    outcomes: List[SeedOutcome]
    mean_dsx: float
    mean_ds_univ: float
    mean_tv_boltzmann: float
    mean_fitted_width: Optional[float] = None
    eigenstate_fit: Optional[LorentzianFit] = None
    width_ratio_to_eigenstate: Optional[float] = None
