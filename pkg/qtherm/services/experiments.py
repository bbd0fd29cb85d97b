"""
Experiment driver: single runs, entropy curves over initial widths and the
microcanonical-limit sweep, each written to a run directory with a
manifest.
"""
import logging
import threading
import time
from collections import OrderedDict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple, TypeVar, Union

import numpy as np
import pandas as pd

from qtherm import __version__
from qtherm.core.config import Settings, get_settings
from qtherm.core.exceptions import ConfigurationError, FitError, InsufficientDataError, QthermError
from qtherm.models.basis import ZeroOrderBasis
from qtherm.models.profile import BinnedProfile
from qtherm.models.state import PureState, SpectralDecomposition
from qtherm.schemas.experiment import (
    BasisStateFamily,
    ExperimentConfig,
    InitialFamily,
    LorentzianFamily,
    RunManifest,
    TimeGrid,
)
from qtherm.schemas.model import ModelSpec
from qtherm.schemas.results import FluctuationReport, LorentzianFit, MasterPrediction, RunSummary, SeedOutcome
from qtherm.services import analytic
from qtherm.services.hamiltonian import (
    build_basis,
    build_hamiltonian,
    derived_quantities,
    final_density,
    initial_density,
    resolve_spec,
)
from qtherm.services.observables import (
    boltzmann_distribution,
    entropy_timeseries,
    environment_entropy_change,
    excess_entropy,
    heat,
    split_entropy,
    system_distribution,
    total_variation,
)
from qtherm.services.persistence import file_digest, write_csv, write_json
from qtherm.services.spectral import (
    decompose,
    equilibration_time,
    mid_spectrum_indices,
    pooled_eigenstate_envelope,
    propagate_many,
)
from qtherm.services.states import (
    build_basis_state,
    build_lorentzian_state,
    export_state_csv,
    lorentzian_weights,
    nearest_basis_index,
)
from qtherm.services.stats import (
    bin_profile,
    default_bin_count,
    fit_lorentzian,
    fluctuation_test,
    lorentzian_profile,
    profile_frame,
    rescale_coefficients,
    state_samples,
)

logger = logging.getLogger(__name__)

T = TypeVar("T")

CURVE_COLUMNS = [
    "family", "gamma0", "gamma0_rho0", "seed", "S_initial", "S_initial_pred",
    "S_final", "S_final_pred", "gamma_f", "dSx", "dSx_pred", "regime", "flags",
]
SWEEP_COLUMNS = [
    "step", "k", "A", "dimension", "rho0", "rho_f", "family", "gamma0", "n_seeds",
    "dSx", "dSx_pred", "ratio", "tv_boltzmann", "thermalized",
]
EIGENSTATES_PER_FIT = 20


@dataclass(frozen=True, eq=False)
class Realization:
    """A model with one coupling draw: basis and full decomposition."""

    spec: ModelSpec
    basis: ZeroOrderBasis
    decomposition: SpectralDecomposition


@dataclass(eq=False)
class Simulation:
    """In-memory result of one seed of a single run."""

    outcome: SeedOutcome
    timeseries: pd.DataFrame
    initial_state: PureState
    final_state: PureState
    profile_initial: pd.DataFrame
    profile_final: pd.DataFrame
    realization: Realization


class ExperimentRunner:
    """
    Runs experiments and writes their outputs.

    Realizations (basis plus decomposition) are memoized per model so that
    experiments sharing a coupling draw diagonalize once. Independent
    seeds and grid points run on a thread pool when ``jobs`` > 1; results
    are always gathered in submission order.
    """

    def __init__(self, settings: Optional[Settings] = None, jobs: int = 1):
        if jobs < 1:
            raise ConfigurationError(f"jobs must be >= 1, got {jobs}")
        self.settings = settings or get_settings()
        self.jobs = jobs
        self._realizations: "OrderedDict[str, Realization]" = OrderedDict()
        self._locks: Dict[str, threading.Lock] = {}
        self._guard = threading.Lock()

    # ------------------------------------------------------------------
    # building blocks

    def _map(self, fn: Callable[..., T], items: Iterable) -> List[T]:
        items = list(items)
        if self.jobs == 1 or len(items) <= 1:
            return [fn(item) for item in items]
        with ThreadPoolExecutor(max_workers=self.jobs) as executor:
            return list(executor.map(fn, items))

    def resolve(self, config: ExperimentConfig, gamma0: Optional[float] = None) -> ExperimentConfig:
        """Fill in the window half-width and the time grid so the config is fully explicit."""
        gamma0 = config.gamma0 if gamma0 is None else gamma0
        model = resolve_spec(config.model, gamma0, self.settings)
        t_max = config.time_grid.t_max
        if t_max is None:
            if model.coupling > 0:
                t_max = 2.0 * equilibration_time(model, self.settings)
            else:
                t_max = self.settings.equilibration_factor
                logger.warning(f"No coupling: sampling up to t={t_max:g} without equilibration")
        n_samples = config.time_grid.n_samples or self.settings.timeseries_samples
        return config.model_copy(update={"model": model, "time_grid": TimeGrid(t_max=t_max, n_samples=n_samples)})

    @staticmethod
    def seed_spec(model: ModelSpec, seed_index: int) -> ModelSpec:
        """Model of the ``seed_index``-th realization."""
        if seed_index == 0:
            return model
        return model.model_copy(update={"seed": model.seed + seed_index})

    def realization(self, spec: ModelSpec) -> Realization:
        """Build and diagonalize a model, memoized per model content."""
        key = spec.canonical_json()
        with self._guard:
            cached = self._realizations.get(key)
            if cached is not None:
                self._realizations.move_to_end(key)
                return cached
            lock = self._locks.setdefault(key, threading.Lock())

        with lock:
            with self._guard:
                cached = self._realizations.get(key)
            if cached is not None:
                return cached
            basis, hamiltonian = build_hamiltonian(spec, self.settings)
            realization = Realization(spec=spec, basis=basis, decomposition=decompose(spec, hamiltonian, self.settings))
            with self._guard:
                self._realizations[key] = realization
                while len(self._realizations) > self.settings.realization_cache_size:
                    evicted, _ = self._realizations.popitem(last=False)
                    self._locks.pop(evicted, None)
            return realization

    @staticmethod
    def initial_state(family: InitialFamily, spec: ModelSpec, basis: ZeroOrderBasis, master_seed: int,
                      stream_keys: Sequence[Union[int, str]]) -> Tuple[PureState, float]:
        """
        Build the initial state of a family.

        Lorentzians are centered on the zero-order energy of the level
        nearest E0 so that the narrow-width limit is that basis state.

        Returns:
            (state, center energy)
        """
        s = family.system_level
        if isinstance(family, BasisStateFamily):
            bath_index = family.bath_index
            if bath_index is None:
                bath_index = int(basis.bath_index[nearest_basis_index(basis, s, spec.center_energy)])
            state = build_basis_state(basis, s, bath_index)
            return state, float(basis.energies[basis.index_of(s, bath_index)])

        center = float(basis.energies[nearest_basis_index(basis, s, spec.center_energy)])
        state = build_lorentzian_state(
            basis,
            s,
            center,
            family.gamma0,
            master_seed,
            rho0=initial_density(spec, s, energy=center),
            deviates=family.deviates,
            stream_keys=stream_keys,
        )
        return state, center

    def _fit(self, profile: BinnedProfile, center: float, width: float, amplitude: float) -> Optional[LorentzianFit]:
        if width <= 0 or profile.degenerate:
            return None
        try:
            return fit_lorentzian(profile, center, width, amplitude, settings=self.settings)
        except InsufficientDataError as e:
            logger.warning(f"Skipping Lorentzian fit: {e.message}")
            return None
        except FitError as e:
            logger.warning(f"Lorentzian fit failed, recorded as null: {e.message}")
            return None

    def _profile(self, energies: np.ndarray, weights: np.ndarray, center: float, half_width: float,
                 gamma: float, n_bins: Optional[int]) -> BinnedProfile:
        n_bins = n_bins or default_bin_count(2.0 * half_width, gamma, self.settings)
        return bin_profile(energies, weights, n_bins, (center - half_width, center + half_width))

    def eigenstate_fit(self, realization: Realization, center: float,
                       count: int = EIGENSTATES_PER_FIT, window_widths: float = 8.0) -> Optional[LorentzianFit]:
        """Fit the pooled envelope of the eigenstates nearest ``center``; offset is the fitted center."""
        spec = realization.spec
        width = analytic.eigenstate_width(spec.coupling, final_density(spec, energy=center))
        if width <= 0:
            return None
        indices = mid_spectrum_indices(realization.decomposition, center, count)
        envelope = pooled_eigenstate_envelope(realization.decomposition, realization.basis, indices)
        half = window_widths * width
        mask = np.abs(envelope.energies) <= half
        profile = self._profile(envelope.energies[mask], envelope.weights[mask], 0.0, half, width, None)
        fit = self._fit(profile, 0.0, width, 1.0 / final_density(spec, energy=center))
        if fit is not None:
            fit = fit.model_copy(update={"offset": fit.center})
        return fit

    # ------------------------------------------------------------------
    # single run

    def simulate(self, config: ExperimentConfig, seed_index: int = 0) -> Simulation:
        """
        Evolve one realization of a resolved config and collect all observables.

        Args:
            config: Config with explicit window and time grid (see ``resolve``)
            seed_index: Realization index; the coupling seed is model.seed + seed_index
        """
        spec = self.seed_spec(config.model, seed_index)
        realization = self.realization(spec)
        basis = realization.basis
        family = config.initial_state
        temperature = spec.temperature

        state0, center = self.initial_state(family, spec, basis, config.model.seed, ("run", seed_index))
        t_max = config.time_grid.t_max
        times = np.linspace(0.0, t_max, config.time_grid.n_samples)
        states = propagate_many(state0, realization.decomposition, times)
        final_state = states[-1]

        series = entropy_timeseries(states, temperature)
        initial = split_entropy(state0, temperature)
        final = split_entropy(final_state, temperature)
        on_plateau = [s for s in states if s.t >= 0.5 * t_max]
        p_plateau = np.mean([system_distribution(s) for s in on_plateau], axis=0)
        dsx_plateau = float(series.loc[series["t"] >= 0.5 * t_max, "dSx"].mean())

        s = family.system_level
        rho0 = initial_density(spec, s, energy=center)
        rho_f = final_density(spec, energy=center)
        prediction = analytic.master_prediction(config.gamma0, rho0, rho_f, spec.coupling)
        widths = config.bins.fit_window_widths

        # initial envelope on the occupied system level
        gamma0 = config.gamma0
        init_gamma = gamma0 if gamma0 > 0 else prediction.gamma_f
        init_half = widths * init_gamma if init_gamma > 0 else 0.5
        energies, weights = state_samples(state0, system_level=s)
        profile0 = self._profile(energies, weights, center, init_half, init_gamma, config.bins.n_bins)
        if gamma0 > 0:
            expected0 = lorentzian_weights(profile0.centers, center, gamma0, rho0)
            fit_initial = self._fit(profile0, center, gamma0, 1.0 / rho0)
        else:
            expected0 = np.full(profile0.n_bins, np.nan)
            fit_initial = None
        dof0 = 1 if isinstance(family, LorentzianFamily) and family.deviates == "real" else 2

        # final envelope over all system levels
        gamma_f = prediction.gamma_f
        final_half = widths * gamma_f if gamma_f > 0 else 0.5
        energies, weights = state_samples(final_state)
        profile_f = self._profile(energies, weights, center, final_half, gamma_f, config.bins.n_bins)
        if gamma_f > 0:
            expected_f = lorentzian_weights(profile_f.centers, center, gamma_f, rho_f)
        else:
            expected_f = np.full(profile_f.n_bins, np.nan)
        fit_final = self._fit(profile_f, center, gamma_f, 1.0 / rho_f)
        fluctuation = self._final_fluctuations(final_state, fit_final, center, final_half)

        outcome = SeedOutcome(
            seed_index=seed_index,
            model_seed=spec.seed,
            family=family.kind,
            center_energy=center,
            initial=initial,
            final=final,
            heat=heat(initial, final),
            ds_univ=final.s_univ - initial.s_univ,
            ds_env=environment_entropy_change(initial, final),
            dsx_final=excess_entropy(initial, final, temperature),
            dsx_plateau=dsx_plateau,
            p_sys_plateau=p_plateau.tolist(),
            tv_boltzmann=total_variation(p_plateau, boltzmann_distribution(basis.system_energies, temperature)),
            prediction=prediction,
            fit_initial=fit_initial,
            fit_final=fit_final,
            fluctuation_final=fluctuation,
            flags=sorted(state0.flags),
        )
        logger.info(
            f"Seed {seed_index}: dS_univ={outcome.ds_univ:.4f}, dSx={outcome.dsx_plateau:.4f} "
            f"(predicted {prediction.dsx_pred:.4f}), TV={outcome.tv_boltzmann:.4f}"
        )
        return Simulation(
            outcome=outcome,
            timeseries=series,
            initial_state=state0,
            final_state=final_state,
            profile_initial=profile_frame(profile0, expected0, dof0),
            profile_final=profile_frame(profile_f, expected_f, 2),
            realization=realization,
        )

    @staticmethod
    def _final_fluctuations(state: PureState, fit: Optional[LorentzianFit], center: float,
                            half_width: float) -> Optional[FluctuationReport]:
        if fit is None:
            return None
        basis = state.basis
        members = np.abs(basis.energies - center) <= half_width
        envelope = lorentzian_profile(basis.energies[members], fit.center, fit.width, fit.amplitude)
        try:
            return fluctuation_test(rescale_coefficients(state.amplitudes[members], envelope, complex_valued=True))
        except InsufficientDataError as e:
            logger.warning(f"Skipping fluctuation test: {e.message}")
            return None

    def run_single(self, config: ExperimentConfig, out_dir: Optional[Union[str, Path]] = None) -> Path:
        """
        Run one experiment and write its outputs.

        Writes manifest.json, timeseries.csv (seed 0; further seeds as
        timeseries_seed<i>.csv), profile_initial.csv, profile_final.csv,
        fits.json, predictions.csv and, when requested, the state vectors.

        Returns:
            The run directory

        Raises:
            QthermError: Any failure; a manifest with status "failed" is written first
        """
        run_dir = Path(out_dir) if out_dir is not None else config.resolved_output_dir()
        manifest, clock = self._start_manifest("run", config)

        def body() -> Dict[str, Path]:
            resolved = self.resolve(config)
            manifest.config = resolved
            manifest.derived = derived_quantities(resolved.model, resolved.gamma0, self.settings)
            manifest.seeds = [resolved.model.seed + i for i in range(resolved.n_seeds)]

            simulations = self._map(lambda i: self.simulate(resolved, i), range(resolved.n_seeds))
            first = simulations[0]
            fmt = self.settings.float_format
            written = {
                "timeseries.csv": write_csv(first.timeseries, run_dir / "timeseries.csv", fmt),
                "profile_initial.csv": write_csv(first.profile_initial, run_dir / "profile_initial.csv", fmt),
                "profile_final.csv": write_csv(first.profile_final, run_dir / "profile_final.csv", fmt),
            }
            for sim in simulations[1:]:
                name = f"timeseries_seed{sim.outcome.seed_index}.csv"
                written[name] = write_csv(sim.timeseries, run_dir / name, fmt)

            predictions = analytic.prediction_table(sim.outcome.prediction for sim in simulations)
            written["predictions.csv"] = write_csv(predictions, run_dir / "predictions.csv", fmt)
            written["fits.json"] = write_json(self._summarize(simulations), run_dir / "fits.json")
            if resolved.export_states:
                written["initial_state.csv"] = write_csv(
                    export_state_csv(first.initial_state), run_dir / "initial_state.csv", fmt
                )
                written["final_state.csv"] = write_csv(
                    export_state_csv(first.final_state), run_dir / "final_state.csv", fmt
                )
            return written

        self._execute(run_dir, manifest, clock, body)
        logger.info(f"Run written to {run_dir}")
        return run_dir

    def _summarize(self, simulations: List[Simulation]) -> RunSummary:
        outcomes = [sim.outcome for sim in simulations]
        fitted = [o.fit_final.width for o in outcomes if o.fit_final is not None]
        first = simulations[0]
        eigen_fit = self.eigenstate_fit(first.realization, first.outcome.center_energy)
        mean_width = float(np.mean(fitted)) if fitted else None
        return RunSummary(
            outcomes=outcomes,
            mean_dsx=float(np.mean([o.dsx_plateau for o in outcomes])),
            mean_ds_univ=float(np.mean([o.ds_univ for o in outcomes])),
            mean_tv_boltzmann=float(np.mean([o.tv_boltzmann for o in outcomes])),
            mean_fitted_width=mean_width,
            eigenstate_fit=eigen_fit,
            width_ratio_to_eigenstate=(
                mean_width / eigen_fit.width if mean_width is not None and eigen_fit is not None else None
            ),
        )

    # ------------------------------------------------------------------
    # entropy curve

    def run_entropy_curve(self, config: ExperimentConfig, gamma0_list: Optional[Sequence[float]] = None,
                          out_dir: Optional[Union[str, Path]] = None, evolve: bool = True) -> pd.DataFrame:
        """
        Initial and evolved entropies across initial widths.

        A width of 0 stands for the basis state; with ``evolve`` the evolved
        basis-state point is always included. Without ``evolve`` only the
        initial states are built and nothing is diagonalized.

        Returns:
            Table with one row per (seed, width), also written as curve.csv
        """
        grid = list(gamma0_list if gamma0_list is not None else (config.gamma0_grid or []))
        if not grid:
            raise ConfigurationError("Entropy curve needs a non-empty gamma0 list")
        invalid = [g for g in grid if not np.isfinite(g) or g < 0]
        if invalid:
            raise ConfigurationError("gamma0 entries must be finite and >= 0", details={"invalid": invalid})
        if evolve and 0.0 not in grid:
            grid.append(0.0)
        run_dir = Path(out_dir) if out_dir is not None else config.resolved_output_dir()
        manifest, clock = self._start_manifest("curve", config)
        frame_holder: List[pd.DataFrame] = []

        def body() -> Dict[str, Path]:
            resolved = self.resolve(config, gamma0=max(grid)).model_copy(update={"gamma0_grid": grid})
            manifest.config = resolved
            manifest.derived = derived_quantities(resolved.model, 0.0, self.settings)
            manifest.seeds = [resolved.model.seed + i for i in range(resolved.n_seeds)]

            jobs = [(i, j) for i in range(resolved.n_seeds) for j in range(len(grid))]
            rows = self._map(lambda job: self._curve_point(resolved, job[0], job[1], grid[job[1]], evolve), jobs)
            frame = pd.DataFrame([r[0] for r in rows], columns=CURVE_COLUMNS)
            frame_holder.append(frame)
            fmt = self.settings.float_format
            return {
                "curve.csv": write_csv(frame, run_dir / "curve.csv", fmt),
                "predictions.csv": write_csv(
                    analytic.prediction_table(r[1] for r in rows[: len(grid)]), run_dir / "predictions.csv", fmt
                ),
            }

        self._execute(run_dir, manifest, clock, body)
        return frame_holder[0]

    def _curve_point(self, config: ExperimentConfig, seed_index: int, grid_index: int, gamma0: float,
                     evolve: bool) -> Tuple[dict, MasterPrediction]:
        spec = self.seed_spec(config.model, seed_index)
        s = config.initial_state.system_level
        if gamma0 > 0:
            deviates = config.initial_state.deviates if isinstance(config.initial_state, LorentzianFamily) else "complex"
            family: InitialFamily = LorentzianFamily(gamma0=gamma0, system_level=s, deviates=deviates)
        else:
            family = BasisStateFamily(system_level=s)

        if evolve:
            realization = self.realization(spec)
            basis = realization.basis
        else:
            basis = build_basis(spec, self.settings)

        state0, center = self.initial_state(family, spec, basis, config.model.seed, ("curve", grid_index, seed_index))
        temperature = spec.temperature
        rho0 = initial_density(spec, s, energy=center)
        rho_f = final_density(spec, energy=center)
        prediction = analytic.master_prediction(gamma0, rho0, rho_f, spec.coupling)
        initial = split_entropy(state0, temperature)

        s_final, dsx = np.nan, np.nan
        if evolve:
            t_max = config.time_grid.t_max
            times = np.linspace(0.5 * t_max, t_max, self.settings.plateau_samples)
            finals = [split_entropy(st, temperature) for st in propagate_many(state0, realization.decomposition, times)]
            s_final = float(np.mean([b.s_univ for b in finals]))
            dsx = float(np.mean([excess_entropy(initial, b, temperature) for b in finals]))

        row = {
            "family": family.kind,
            "gamma0": gamma0,
            "gamma0_rho0": gamma0 * rho0,
            "seed": spec.seed,
            "S_initial": initial.s_univ,
            "S_initial_pred": prediction.s_initial,
            "S_final": s_final,
            "S_final_pred": prediction.s_final,
            "gamma_f": prediction.gamma_f,
            "dSx": dsx,
            "dSx_pred": prediction.dsx_pred,
            "regime": prediction.regime,
            "flags": ";".join(sorted(state0.flags)),
        }
        logger.debug(f"Curve point gamma0={gamma0:.4g}, seed={spec.seed}: S0={initial.s_univ:.4f}, dSx={dsx:.4f}")
        return row, prediction

    # ------------------------------------------------------------------
    # microcanonical-limit sweep

    def sweep_specs(self, config: ExperimentConfig, steps: int, hold_prefactor: bool = False) -> List[ModelSpec]:
        """
        Models of the limit sweep: k halves and A doubles at every step.

        The window scales with the predicted final width of the sweep's
        Lorentzian. With ``hold_prefactor`` A stays fixed (decoupling control).
        """
        gamma0 = config.sweep_gamma0
        base = resolve_spec(config.model, gamma0, self.settings)
        if base.coupling == 0:
            raise ConfigurationError("Limit sweep needs a non-zero coupling")
        base_gamma_f = analytic.final_width(gamma0, base.coupling, final_density(base))
        specs = []
        for step in range(steps):
            factor = 2.0 ** step
            trial = base.model_copy(update={
                "bath_prefactor": base.bath_prefactor if hold_prefactor else base.bath_prefactor * factor,
                "coupling": base.coupling / factor,
            })
            gamma_f = analytic.final_width(gamma0, trial.coupling, final_density(trial))
            width = min(base.window_half_width * gamma_f / base_gamma_f, base.center_energy)
            specs.append(trial.model_copy(update={"window_half_width": width}))
        return specs

    def run_limit_sweep(self, config: ExperimentConfig, steps: Optional[int] = None,
                        out_dir: Optional[Union[str, Path]] = None, hold_prefactor: bool = False) -> pd.DataFrame:
        """
        Excess entropy of Lorentzian and basis-state families toward the microcanonical limit.

        Returns:
            Seed-averaged table with one row per (step, family), also written as sweep.csv
        """
        steps = steps or config.sweep_steps
        if steps < 3:
            raise ConfigurationError(f"Limit sweep needs at least 3 steps, got {steps}")
        run_dir = Path(out_dir) if out_dir is not None else config.resolved_output_dir()
        manifest, clock = self._start_manifest("sweep", config)
        frame_holder: List[pd.DataFrame] = []

        def body() -> Dict[str, Path]:
            specs = self.sweep_specs(config, steps, hold_prefactor)
            manifest.config = config.model_copy(update={"sweep_steps": steps})
            manifest.derived = derived_quantities(specs[0], config.sweep_gamma0, self.settings)
            manifest.seeds = [config.model.seed + i for i in range(config.n_seeds)]

            families = ("lorentzian", "basis_state")
            jobs = [(step, fam, i) for step in range(steps) for fam in families for i in range(config.n_seeds)]
            rows = self._map(lambda job: self._sweep_point(config, specs[job[0]], *job), jobs)
            raw = pd.DataFrame([r[0] for r in rows])
            frame = self._aggregate_sweep(raw)
            frame_holder.append(frame)
            fmt = self.settings.float_format
            predictions = [r[1] for r in rows if r[0]["seed_index"] == 0]
            return {
                "sweep.csv": write_csv(frame, run_dir / "sweep.csv", fmt),
                "predictions.csv": write_csv(analytic.prediction_table(predictions), run_dir / "predictions.csv", fmt),
            }

        self._execute(run_dir, manifest, clock, body)
        return frame_holder[0]

    def _sweep_point(self, config: ExperimentConfig, step_spec: ModelSpec, step: int, family_kind: str,
                     seed_index: int) -> Tuple[dict, MasterPrediction]:
        spec = self.seed_spec(step_spec, seed_index)
        realization = self.realization(spec)
        basis = realization.basis
        s = config.initial_state.system_level
        gamma0 = config.sweep_gamma0 if family_kind == "lorentzian" else 0.0
        family: InitialFamily = (
            LorentzianFamily(gamma0=gamma0, system_level=s) if gamma0 > 0 else BasisStateFamily(system_level=s)
        )
        state0, center = self.initial_state(family, spec, basis, config.model.seed, ("sweep", step, seed_index))
        temperature = spec.temperature

        t_max = 2.0 * equilibration_time(spec, self.settings)
        times = np.linspace(0.5 * t_max, t_max, self.settings.plateau_samples)
        states = propagate_many(state0, realization.decomposition, times)
        initial = split_entropy(state0, temperature)
        finals = [split_entropy(st, temperature) for st in states]
        p_plateau = np.mean([b.p_sys for b in finals], axis=0)
        tv = total_variation(p_plateau, boltzmann_distribution(basis.system_energies, temperature))

        rho0 = initial_density(spec, s, energy=center)
        rho_f = final_density(spec, energy=center)
        prediction = analytic.master_prediction(gamma0, rho0, rho_f, spec.coupling)
        row = {
            "step": step,
            "k": spec.coupling,
            "A": spec.bath_prefactor,
            "dimension": basis.dimension,
            "rho0": rho0,
            "rho_f": rho_f,
            "family": family_kind,
            "gamma0": gamma0,
            "seed_index": seed_index,
            "dSx": float(np.mean([excess_entropy(initial, b, temperature) for b in finals])),
            "dSx_pred": prediction.dsx_pred,
            "tv_boltzmann": tv,
        }
        logger.info(f"Sweep step {step} {family_kind} seed {seed_index}: dSx={row['dSx']:.4f}, TV={tv:.4f}")
        return row, prediction

    def _aggregate_sweep(self, raw: pd.DataFrame) -> pd.DataFrame:
        keys = ["step", "family"]
        grouped = raw.groupby(keys, sort=False)
        frame = grouped.agg(
            k=("k", "first"),
            A=("A", "first"),
            dimension=("dimension", "first"),
            rho0=("rho0", "first"),
            rho_f=("rho_f", "first"),
            gamma0=("gamma0", "first"),
            n_seeds=("seed_index", "count"),
            dSx=("dSx", "mean"),
            dSx_pred=("dSx_pred", "first"),
            tv_boltzmann=("tv_boltzmann", "mean"),
        ).reset_index()
        frame = frame.sort_values(keys, kind="stable").reset_index(drop=True)
        frame["ratio"] = frame.groupby("family")["dSx"].transform(lambda v: v / v.shift(1))
        frame["thermalized"] = frame["tv_boltzmann"] <= self.settings.thermalization_tolerance
        return frame[SWEEP_COLUMNS]

    # ------------------------------------------------------------------
    # manifests

    def _start_manifest(self, kind: str, config: ExperimentConfig) -> Tuple[RunManifest, float]:
        manifest = RunManifest(
            kind=kind,
            config=config,
            code_version=__version__,
            settings=self.settings.model_dump(mode="json"),
            started_at=datetime.now(timezone.utc),
        )
        return manifest, time.perf_counter()

    def _execute(self, run_dir: Path, manifest: RunManifest, clock: float,
                 body: Callable[[], Dict[str, Path]]) -> None:
        """Run ``body``, then write the manifest with digests, or a failed manifest on error."""
        run_dir.mkdir(parents=True, exist_ok=True)
        try:
            written = body()
        except Exception as e:
            manifest.status = "failed"
            manifest.error = e.to_dict() if isinstance(e, QthermError) else {"type": type(e).__name__, "message": str(e)}
            manifest.wall_clock_seconds = time.perf_counter() - clock
            write_json(manifest, run_dir / "manifest.json")
            logger.error(f"{manifest.kind} failed, partial outputs in {run_dir}: {e}")
            raise
        manifest.outputs = {name: file_digest(path) for name, path in sorted(written.items())}
        manifest.wall_clock_seconds = time.perf_counter() - clock
        write_json(manifest, run_dir / "manifest.json")


def run_single(config: ExperimentConfig, out_dir: Optional[Union[str, Path]] = None,
               settings: Optional[Settings] = None, jobs: int = 1) -> Path:
    """Run one experiment with a fresh runner."""
    return ExperimentRunner(settings, jobs).run_single(config, out_dir)


def run_entropy_curve(config: ExperimentConfig, gamma0_list: Optional[Sequence[float]] = None,
                      out_dir: Optional[Union[str, Path]] = None, settings: Optional[Settings] = None,
                      jobs: int = 1, evolve: bool = True) -> pd.DataFrame:
    """Entropy curve with a fresh runner."""
    return ExperimentRunner(settings, jobs).run_entropy_curve(config, gamma0_list, out_dir, evolve)


def run_limit_sweep(config: ExperimentConfig, steps: Optional[int] = None,
                    out_dir: Optional[Union[str, Path]] = None, settings: Optional[Settings] = None,
                    jobs: int = 1, hold_prefactor: bool = False) -> pd.DataFrame:
    """Limit sweep with a fresh runner."""
    return ExperimentRunner(settings, jobs).run_limit_sweep(config, steps, out_dir, hold_prefactor)
