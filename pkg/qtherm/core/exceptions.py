"""
Exception hierarchy for qtherm.

Every error carries the process exit code the CLI should use and a
``details`` mapping with measured values, so failures can be reported in
machine-readable form.
"""
from typing import Any, Dict, Optional


class QthermError(Exception):
    """Base class for all qtherm errors."""

    exit_code = 1

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.message = message
        self.details = details or {}

    def to_dict(self) -> Dict[str, Any]:
        """Serialize the error for manifests and reports."""
        return {
            "type": type(self).__name__,
            "message": self.message,
            "details": self.details,
        }


class ConfigurationError(QthermError):
    """Invalid model or experiment configuration."""

    exit_code = 2


class ResourceError(ConfigurationError):
    """Requested problem size exceeds the configured limits."""


class BasisLookupError(ConfigurationError, LookupError):
    """A (s, ε) label is not part of the truncated zero-order basis."""


class NumericError(QthermError):
    """A numerical routine failed."""

    exit_code = 3


class FitError(NumericError):
    """Nonlinear least squares did not converge."""


class InsufficientDataError(NumericError):
    """Too few samples for the requested statistic."""


class CacheIntegrityError(NumericError):
    """A spectral cache file is corrupted or belongs to another model."""


class VerificationError(QthermError):
    """One or more verification criteria failed."""

    exit_code = 4
