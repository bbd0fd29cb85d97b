"""
Command-line interface.

Subcommands: model, run, curve, sweep, verify. Exit codes: 0 ok,
2 configuration error, 3 numeric error, 4 verification failure.
"""
import argparse
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

from pydantic import ValidationError

from qtherm import __version__
from qtherm.core.config import Settings, get_settings, recorded_settings
from qtherm.core.exceptions import ConfigurationError, QthermError, VerificationError
from qtherm.core.logging import setup_logging
from qtherm.schemas.experiment import ExperimentConfig, RunManifest
from qtherm.services.experiments import ExperimentRunner
from qtherm.services.hamiltonian import derived_quantities
from qtherm.services.presets import PRESETS, get_preset
from qtherm.services.verification import ALL_CRITERIA, verify

logger = logging.getLogger(__name__)

DEFAULT_PRESET = "desk-small"


def load_run_file(path: Path) -> Tuple[ExperimentConfig, Optional[Settings]]:
    """
    Load an ExperimentConfig from JSON, or the config echo of a run manifest.

    For a manifest the recorded settings are rebuilt as well, so a replay
    does not depend on the current QTHERM_ environment.

    Returns:
        (config, recorded settings or None for a plain config)

    Raises:
        ConfigurationError: Unreadable file or invalid content
    """
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigurationError(f"Cannot read config {path}: {e}") from e
    try:
        if isinstance(payload, dict) and "code_version" in payload and "config" in payload:
            manifest = RunManifest.model_validate(payload)
            settings = recorded_settings(manifest.settings) if manifest.settings else None
            return manifest.config, settings
        return ExperimentConfig.model_validate(payload), None
    except ValidationError as e:
        raise ConfigurationError(
            f"Invalid config {path}", details={"errors": json.loads(e.json())}
        ) from e


def load_config(path: Path) -> ExperimentConfig:
    """Config part of ``load_run_file``."""
    return load_run_file(path)[0]


def resolve_config(args: argparse.Namespace) -> Tuple[ExperimentConfig, Settings]:
    """
    Config from --config or --preset (default desk-small), then --seed and --out.

    Settings are the ones recorded in a manifest passed as --config, the
    current runtime settings otherwise.
    """
    if args.config is not None and args.preset is not None:
        raise ConfigurationError("Use either --config or --preset, not both")
    settings = None
    if args.config is not None:
        config, settings = load_run_file(args.config)
    else:
        config = get_preset(args.preset or DEFAULT_PRESET)
    if args.seed is not None:
        config = config.with_seed(args.seed)
    if args.out is not None:
        config = config.model_copy(update={"output_dir": args.out})
    return config, settings if settings is not None else get_settings()


def _parse_floats(text: str) -> List[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from e


def _parse_ints(text: str) -> List[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from e


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="ExperimentConfig JSON or a run manifest.json")
    common.add_argument("--preset", choices=sorted(PRESETS), help=f"Named preset (default {DEFAULT_PRESET})")
    common.add_argument("--seed", type=int, help="Master seed override")
    common.add_argument("--out", type=Path, help="Output directory")
    common.add_argument("--jobs", type=int, default=1, help="Parallel jobs for independent seeds and grid points")
    common.add_argument("--log-level", type=str.upper, choices=["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"],
                        help="Override QTHERM_LOG_LEVEL")
    common.add_argument("--log-file", type=Path, help="Also write log records to this file")

    parser = argparse.ArgumentParser(prog="qtherm", description="Quantum entropy production experiments.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("model", parents=[common], help="Print derived model quantities as JSON")
    sub.add_parser("run", parents=[common], help="Single run: time series, profiles, fits, predictions")

    curve = sub.add_parser("curve", parents=[common], help="Entropy curve over initial widths")
    curve.add_argument("--gamma0", type=_parse_floats, help="Comma-separated widths (default: the config grid)")
    curve.add_argument("--no-evolve", action="store_true", help="Initial states only, no diagonalization")

    sweep = sub.add_parser("sweep", parents=[common], help="Microcanonical-limit sweep")
    sweep.add_argument("--steps", type=int, help="Number of coupling halvings (default: the config value)")
    sweep.add_argument("--hold-prefactor", action="store_true", help="Keep A fixed while k halves")

    check = sub.add_parser("verify", parents=[common], help="Run the acceptance checks")
    check.add_argument("--quick", action="store_true", help="Fewer seeds and steps")
    check.add_argument("--seeds", type=int, default=1, help="Number of master seeds")
    check.add_argument("--only", type=_parse_ints, help=f"Comma-separated criteria out of {list(ALL_CRITERIA)}")
    return parser


def _command_model(args: argparse.Namespace) -> int:
    config, settings = resolve_config(args)
    derived = derived_quantities(config.model, config.gamma0, settings)
    print(derived.model_dump_json(indent=2))
    return 0


def _command_run(args: argparse.Namespace) -> int:
    config, settings = resolve_config(args)
    run_dir = ExperimentRunner(settings, args.jobs).run_single(config)
    print(run_dir)
    return 0


def _command_curve(args: argparse.Namespace) -> int:
    config, settings = resolve_config(args)
    ExperimentRunner(settings, args.jobs).run_entropy_curve(config, args.gamma0, evolve=not args.no_evolve)
    print(config.resolved_output_dir())
    return 0


def _command_sweep(args: argparse.Namespace) -> int:
    config, settings = resolve_config(args)
    ExperimentRunner(settings, args.jobs).run_limit_sweep(config, args.steps, hold_prefactor=args.hold_prefactor)
    print(config.resolved_output_dir())
    return 0


def _command_verify(args: argparse.Namespace) -> int:
    if args.seeds < 1:
        raise ConfigurationError(f"--seeds must be >= 1, got {args.seeds}")
    config, settings = None, get_settings()
    if args.config is not None or args.preset is not None or args.seed is not None:
        config, settings = resolve_config(args)
    out = args.out if args.out is not None else Path("runs") / "verify"
    report = verify(config, quick=args.quick, seeds=args.seeds, only=args.only, out_dir=out,
                    settings=settings, jobs=args.jobs)
    print(out / "verification.json")
    if not report.passed:
        failed = [f"{c.criterion}:{c.name}" for c in report.checks if not c.passed]
        raise VerificationError("Verification failed", details={"failed": failed})
    return 0


COMMANDS = {
    "model": _command_model,
    "run": _command_run,
    "curve": _command_curve,
    "sweep": _command_sweep,
    "verify": _command_verify,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Entry point; returns the process exit code."""
    args = build_parser().parse_args(argv)
    try:
        settings = get_settings()
    except ValidationError as e:
        print(f"Invalid QTHERM_ settings: {e}", file=sys.stderr)
        return ConfigurationError.exit_code
    setup_logging(args.log_level or settings.log_level, log_file=args.log_file)

    try:
        if args.jobs < 1:
            raise ConfigurationError(f"--jobs must be >= 1, got {args.jobs}")
        return COMMANDS[args.command](args)
    except QthermError as e:
        logger.error(f"{type(e).__name__}: {e.message}")
        print(json.dumps(e.to_dict(), default=str), file=sys.stderr)
        return e.exit_code
    except ValidationError as e:
        error = ConfigurationError("Invalid configuration", details={"errors": json.loads(e.json())})
        logger.error(f"ConfigurationError: {e}")
        print(json.dumps(error.to_dict(), default=str), file=sys.stderr)
        return error.exit_code


if __name__ == "__main__":
    sys.exit(main())
