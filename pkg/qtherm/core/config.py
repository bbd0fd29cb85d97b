"""
Runtime configuration management using Pydantic Settings
"""
from functools import lru_cache
from pathlib import Path
from typing import Any, Dict, Optional

from pydantic import Field, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Runtime settings with environment variable support (prefix QTHERM_)."""

    model_config = SettingsConfigDict(
        env_prefix="QTHERM_",
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=False,
        extra="ignore",
    )

    log_level: str = Field(default="INFO")

    # Spectral cache; disabled when unset
    cache_dir: Optional[Path] = Field(default=None)

    # Model construction
    max_dimension: int = Field(default=20000, gt=0)
    min_bath_levels: int = Field(default=10, gt=0)
    window_widths: float = Field(default=50.0, gt=0)
    min_window_half_width: float = Field(default=3.0, ge=0)

    # Dynamics
    equilibration_factor: float = Field(default=10.0, gt=0)
    timeseries_samples: int = Field(default=41, ge=2)
    plateau_samples: int = Field(default=5, ge=1)
    thermalization_tolerance: float = Field(default=0.05, gt=0)
    realization_cache_size: int = Field(default=2, ge=1)

    # Statistics
    min_bins: int = Field(default=25, ge=10)
    bins_per_width: int = Field(default=4, ge=1)
    fit_max_iterations: int = Field(default=200, gt=0)
    fit_tolerance: float = Field(default=1e-10, gt=0)

    # Output
    float_format: str = Field(default="%.10e")

    @field_validator("log_level")
    @classmethod
    def validate_log_level(cls, v: str) -> str:
        """Validate log level setting."""
        valid_levels = ["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"]
        if v.upper() not in valid_levels:
            raise ValueError(f"Log level must be one of: {valid_levels}")
        return v.upper()

    @field_validator("cache_dir", mode="before")
    @classmethod
    def parse_cache_dir(cls, v):
        """Treat an empty cache directory as disabled."""
        if isinstance(v, str) and not v.strip():
            return None
        return v


@lru_cache()
def get_settings() -> Settings:
    """Get cached runtime settings."""
    return Settings()


HOST_SETTINGS = ("log_level", "cache_dir")


def recorded_settings(recorded: Dict[str, Any], current: Optional[Settings] = None) -> Settings:
    """
    Rebuild the settings a run was produced with.

    Recorded values take precedence over QTHERM_ variables and .env; the
    host-local fields in HOST_SETTINGS come from ``current``. Names that
    are no longer settings are dropped.

    Raises:
        pydantic.ValidationError: If a recorded value is invalid
    """
    current = current or get_settings()
    values = {name: value for name, value in recorded.items() if name in Settings.model_fields}
    values.update({name: getattr(current, name) for name in HOST_SETTINGS})
    return Settings(_env_file=None, **values)
