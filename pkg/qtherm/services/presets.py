"""
Named desk-scale experiment presets.

The full-scale model (A = 1415.3, k = 0.9e-4 at E0 ~ 40) needs N ~ 1e6.
The presets keep T = 6.22 and three system levels but move to E0 = 20
with smaller A and larger k, choosing the dimensionless products k*rho_f
and gamma*rho so every experiment sits in the same regime as its
full-scale counterpart while N stays at a few thousand.
"""
import math
from typing import Callable, Dict, List

import numpy as np

from qtherm.core.exceptions import ConfigurationError
from qtherm.schemas.experiment import BasisStateFamily, ExperimentConfig, LorentzianFamily
from qtherm.schemas.model import ModelSpec
from qtherm.services.hamiltonian import bath_prefactor_for

TEMPERATURE = 6.22
CENTER_ENERGY = 20.0


def desk_model(rho_f: float, k_rho_f: float, window_half_width: float, seed: int = 0) -> ModelSpec:
    """Model with total density ``rho_f`` at E0 and coupling fixed by k * rho_f."""
    return ModelSpec(
        temperature=TEMPERATURE,
        bath_prefactor=bath_prefactor_for(rho_f, CENTER_ENERGY, TEMPERATURE),
        coupling=k_rho_f / rho_f,
        center_energy=CENTER_ENERGY,
        window_half_width=window_half_width,
        seed=seed,
    )


def _desk_small() -> ExperimentConfig:
    # N ~ 1500, gamma_f * rho_f ~ 25
    return ExperimentConfig(
        name="desk-small",
        model=desk_model(rho_f=300.0, k_rho_f=2.0, window_half_width=2.5),
        initial_state=BasisStateFamily(),
    )


def _fig2() -> ExperimentConfig:
    # Lorentzian four times wider than the spreading width; N ~ 6000
    spread_rho_f = 22.5
    rho_f = 2000.0
    gamma_spread = spread_rho_f / rho_f
    return ExperimentConfig(
        name="fig2",
        model=desk_model(rho_f=rho_f, k_rho_f=math.sqrt(spread_rho_f / (2.0 * math.pi)), window_half_width=1.5),
        initial_state=LorentzianFamily(gamma0=4.33 * gamma_spread),
    )


def _fig3_model() -> ModelSpec:
    # spreading width ~ 42 level spacings; N ~ 5000
    return desk_model(rho_f=800.0, k_rho_f=2.6, window_half_width=3.0)


def _fig3() -> ExperimentConfig:
    return ExperimentConfig(name="fig3", model=_fig3_model(), initial_state=BasisStateFamily())


def _fig4() -> ExperimentConfig:
    grid: List[float] = np.logspace(-5.5, -1.0, 10).tolist()
    return ExperimentConfig(
        name="fig4",
        model=_fig3_model(),
        initial_state=LorentzianFamily(gamma0=grid[-1]),
        gamma0_grid=grid,
    )


def _fig5() -> ExperimentConfig:
    grid: List[float] = np.logspace(-6.0, math.log10(0.05), 10).tolist()
    return ExperimentConfig(
        name="fig5",
        model=_fig3_model(),
        initial_state=LorentzianFamily(gamma0=grid[-1]),
        gamma0_grid=grid,
    )


def _fig6() -> ExperimentConfig:
    # first sweep step: spreading width 0.1155 at gamma_s * rho_f = 12, window 40 final widths
    gamma0 = 0.0625
    gamma_spread = 0.1155
    rho_f = 12.0 / gamma_spread
    return ExperimentConfig(
        name="fig6",
        model=desk_model(
            rho_f=rho_f,
            k_rho_f=math.sqrt(12.0 / (2.0 * math.pi)),
            window_half_width=40.0 * (gamma0 + gamma_spread),
        ),
        initial_state=LorentzianFamily(gamma0=gamma0),
        sweep_steps=4,
        sweep_gamma0=gamma0,
    )


PRESETS: Dict[str, Callable[[], ExperimentConfig]] = {
    "desk-small": _desk_small,
    "fig2": _fig2,
    "fig3": _fig3,
    "fig4": _fig4,
    "fig5": _fig5,
    "fig6": _fig6,
}


def get_preset(name: str) -> ExperimentConfig:
    """
    Build a named preset.

    Raises:
        ConfigurationError: If the preset name is unknown
    """
    try:
        return PRESETS[name]()
    except KeyError:
        raise ConfigurationError(f"Unknown preset {name!r}", details={"available": sorted(PRESETS)}) from None
