"""
Unit tests for runtime settings.

Covers defaults, QTHERM_ environment overrides, validation of invalid
values and the cached accessor.
"""
import os
from pathlib import Path
from unittest.mock import patch

import pytest
from pydantic import ValidationError

from qtherm.core.config import Settings, get_settings, recorded_settings


class TestSettings:
    """Test cases for Settings."""

    def test_defaults(self):
        """Defaults match the documented values."""
        with patch.dict(os.environ, {}, clear=True):
            settings = Settings(_env_file=None)

        assert settings.log_level == "INFO"
        assert settings.cache_dir is None
        assert settings.max_dimension == 20000
        assert settings.equilibration_factor == 10.0
        assert settings.window_widths == 50.0
        assert settings.min_window_half_width == 3.0
        assert settings.min_bath_levels == 10
        assert settings.min_bins == 25
        assert settings.bins_per_width == 4
        assert settings.timeseries_samples == 41
        assert settings.float_format == "%.10e"

    def test_no_deployment_fields(self):
        """Stale deployment variables are ignored."""
        with patch.dict(os.environ, {"QTHERM_ENVIRONMENT": "production", "QTHERM_APP_NAME": "x"}, clear=True):
            settings = Settings(_env_file=None)

        assert "environment" not in Settings.model_fields
        assert "app_name" not in Settings.model_fields
        assert not hasattr(settings, "environment")

    def test_environment_overrides(self, tmp_path):
        """QTHERM_ variables override defaults."""
        env = {
            "QTHERM_LOG_LEVEL": "debug",
            "QTHERM_CACHE_DIR": str(tmp_path),
            "QTHERM_MAX_DIMENSION": "500",
            "QTHERM_EQUILIBRATION_FACTOR": "4.5",
        }
        with patch.dict(os.environ, env, clear=True):
            settings = Settings(_env_file=None)

        assert settings.log_level == "DEBUG"
        assert settings.cache_dir == Path(tmp_path)
        assert settings.max_dimension == 500
        assert settings.equilibration_factor == 4.5

    def test_empty_cache_dir_disables_cache(self):
        """An empty QTHERM_CACHE_DIR means no cache."""
        with patch.dict(os.environ, {"QTHERM_CACHE_DIR": ""}, clear=True):
            settings = Settings(_env_file=None)
        assert settings.cache_dir is None

    def test_invalid_log_level(self):
        """Unknown log levels are rejected."""
        with pytest.raises(ValidationError):
            Settings(_env_file=None, log_level="LOUD")

    def test_invalid_limits(self):
        """Non-positive limits are rejected."""
        with pytest.raises(ValidationError):
            Settings(_env_file=None, max_dimension=0)
        with pytest.raises(ValidationError):
            Settings(_env_file=None, timeseries_samples=1)
        with pytest.raises(ValidationError):
            Settings(_env_file=None, min_bins=5)

    def test_get_settings_is_cached(self):
        """get_settings returns one shared instance."""
        get_settings.cache_clear()
        try:
            assert get_settings() is get_settings()
        finally:
            get_settings.cache_clear()


class TestRecordedSettings:
    """Settings rebuilt from a run manifest."""

    def test_recorded_values_beat_environment(self):
        """Recorded values win over QTHERM_ variables."""
        recorded = Settings(_env_file=None, float_format="%.6e", bins_per_width=8).model_dump(mode="json")
        env = {"QTHERM_FLOAT_FORMAT": "%.3e", "QTHERM_BINS_PER_WIDTH": "2", "QTHERM_PLATEAU_SAMPLES": "9"}
        with patch.dict(os.environ, env, clear=True):
            settings = recorded_settings(recorded, Settings(_env_file=None))

        assert settings.float_format == "%.6e"
        assert settings.bins_per_width == 8
        assert settings.plateau_samples == 5

    def test_host_fields_come_from_current(self, tmp_path):
        """Log level and cache directory follow the current host."""
        recorded = Settings(_env_file=None, log_level="DEBUG", cache_dir="/elsewhere").model_dump(mode="json")
        current = Settings(_env_file=None, log_level="WARNING", cache_dir=tmp_path)
        settings = recorded_settings(recorded, current)

        assert settings.log_level == "WARNING"
        assert settings.cache_dir == Path(tmp_path)

    def test_unknown_names_dropped(self):
        """Names that are no longer settings are ignored."""
        settings = recorded_settings({"app_name": "old", "min_bins": 30}, Settings(_env_file=None))
        assert settings.min_bins == 30
        assert not hasattr(settings, "app_name")

    def test_invalid_recorded_value(self):
        """Invalid recorded values are rejected."""
        with pytest.raises(ValidationError):
            recorded_settings({"max_dimension": 0}, Settings(_env_file=None))
