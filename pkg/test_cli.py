"""
Tests for the command-line interface
"""
import json

import pytest

from qtherm.cli import build_parser, load_config, load_run_file, main
from qtherm.core.config import Settings
from qtherm.core.exceptions import ConfigurationError
from qtherm.schemas.experiment import ExperimentConfig, LorentzianFamily, TimeGrid
from qtherm.services.experiments import ExperimentRunner
from qtherm.services.presets import desk_model


@pytest.fixture
def config_file(tmp_path):
    """Small experiment config written as JSON."""
    config = ExperimentConfig(
        name="cli",
        model=desk_model(rho_f=100.0, k_rho_f=1.5, window_half_width=2.0, seed=2),
        initial_state=LorentzianFamily(gamma0=0.1),
        time_grid=TimeGrid(n_samples=5),
    )
    path = tmp_path / "config.json"
    path.write_text(config.model_dump_json(indent=2))
    return path


class TestParser:
    """Argument parsing."""

    def test_subcommands(self):
        parser = build_parser()
        args = parser.parse_args(["curve", "--gamma0", "0.1,0.01", "--no-evolve", "--preset", "fig4"])
        assert args.command == "curve"
        assert args.gamma0 == [0.1, 0.01]
        assert args.no_evolve
        assert args.jobs == 1

    def test_verify_only(self):
        args = build_parser().parse_args(["verify", "--only", "0,2", "--quick"])
        assert args.only == [0, 2]
        assert args.quick

    def test_unknown_preset(self):
        with pytest.raises(SystemExit):
            build_parser().parse_args(["model", "--preset", "nope"])


class TestLoadConfig:
    """Config files."""

    def test_plain_config(self, config_file):
        assert load_config(config_file).name == "cli"

    def test_invalid_json(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{not json")
        with pytest.raises(ConfigurationError):
            load_config(path)

    def test_unknown_field(self, tmp_path):
        path = tmp_path / "extra.json"
        path.write_text(json.dumps({"model": {"temperature": 1.0}, "colour": "red"}))
        with pytest.raises(ConfigurationError):
            load_config(path)

    def test_plain_config_has_no_settings(self, config_file):
        assert load_run_file(config_file)[1] is None

    def test_manifest_carries_settings(self, config_file, tmp_path):
        custom = Settings(_env_file=None, float_format="%.4e", min_bins=30)
        run_dir = ExperimentRunner(custom).run_single(load_config(config_file), tmp_path / "run")
        config, settings = load_run_file(run_dir / "manifest.json")
        assert config.name == "cli"
        assert settings.float_format == "%.4e"
        assert settings.min_bins == 30


class TestMain:
    """End-to-end command runs."""

    def test_model_command(self, capsys):
        assert main(["model", "--preset", "desk-small"]) == 0
        derived = json.loads(capsys.readouterr().out)
        assert derived["dimension"] > 1000
        assert derived["window_half_width"] == 2.5

    def test_log_file(self, tmp_path):
        log = tmp_path / "logs" / "qtherm.log"
        assert main(["model", "--preset", "desk-small", "--log-level", "debug", "--log-file", str(log)]) == 0
        assert "Logging configured with level: DEBUG" in log.read_text()

    def test_bad_config_exit_code(self, tmp_path, capsys):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({"model": {"temperature": -1.0}}))
        assert main(["model", "--config", str(path)]) == 2
        error = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
        assert error["type"] == "ConfigurationError"

    def test_config_and_preset_are_exclusive(self, config_file):
        assert main(["model", "--config", str(config_file), "--preset", "fig2"]) == 2

    def test_invalid_jobs(self, config_file):
        assert main(["model", "--config", str(config_file), "--jobs", "0"]) == 2

    def test_run_and_replay_manifest(self, config_file, tmp_path):
        out = tmp_path / "run"
        assert main(["run", "--config", str(config_file), "--out", str(out)]) == 0
        manifest = out / "manifest.json"
        assert json.loads(manifest.read_text())["status"] == "ok"

        replay = tmp_path / "replay"
        assert main(["run", "--config", str(manifest), "--out", str(replay)]) == 0
        assert (out / "timeseries.csv").read_bytes() == (replay / "timeseries.csv").read_bytes()

    def test_replay_uses_recorded_settings(self, config_file, tmp_path):
        custom = Settings(_env_file=None, float_format="%.4e", bins_per_width=8)
        first = ExperimentRunner(custom).run_single(load_config(config_file), tmp_path / "custom")
        replay = tmp_path / "replay"
        assert main(["run", "--config", str(first / "manifest.json"), "--out", str(replay)]) == 0
        for name in ("timeseries.csv", "profile_initial.csv", "profile_final.csv", "predictions.csv"):
            assert (first / name).read_bytes() == (replay / name).read_bytes(), name

    def test_seed_override(self, config_file, tmp_path):
        out = tmp_path / "seeded"
        assert main(["run", "--config", str(config_file), "--seed", "9", "--out", str(out)]) == 0
        assert json.loads((out / "manifest.json").read_text())["seeds"] == [9]

    def test_curve_without_evolution(self, config_file, tmp_path):
        out = tmp_path / "curve"
        assert main(["curve", "--config", str(config_file), "--gamma0", "0.05,0.1", "--no-evolve",
                     "--out", str(out)]) == 0
        assert (out / "curve.csv").exists()

    def test_negative_width_exit_code(self, config_file, tmp_path, capsys):
        assert main(["curve", "--config", str(config_file), "--gamma0", "-0.1", "--no-evolve",
                     "--out", str(tmp_path / "curve")]) == 2
        error = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
        assert error["type"] == "ConfigurationError"
        assert error["details"]["invalid"] == [-0.1]

    def test_verify_oracle(self, tmp_path):
        assert main(["verify", "--only", "2", "--out", str(tmp_path)]) == 0
        report = json.loads((tmp_path / "verification.json").read_text())
        assert report["passed"]
        assert {c["criterion"] for c in report["checks"]} == {2}
