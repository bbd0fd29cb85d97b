"""
Result persistence: atomic CSV/JSON writes, file digests and the binary
spectral cache.
"""
import hashlib
import json
import logging
import os
import struct
import tempfile
from pathlib import Path
from typing import Any, Optional, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel

from qtherm.core.exceptions import CacheIntegrityError
from qtherm.models.state import SpectralDecomposition
from qtherm.schemas.model import ModelSpec

logger = logging.getLogger(__name__)

CACHE_MAGIC = b"QSPC"
CACHE_VERSION = 1
CACHE_SUFFIX = ".qspec"
# magic, uint32 version, uint64 N, key digest, payload digest
_HEADER = struct.Struct("<4sIQ32s32s")


def _atomic_write_bytes(path: Path, payload: bytes) -> Path:
    """Write ``payload`` to a temp file next to ``path`` and rename it into place."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, "wb") as handle:
            handle.write(payload)
        os.replace(tmp_name, path)
    except BaseException:
        if os.path.exists(tmp_name):
            os.unlink(tmp_name)
        raise
    return path


def write_csv(frame: pd.DataFrame, path: Union[str, Path], float_format: str = "%.10e") -> Path:
    """Write a DataFrame as CSV atomically with a fixed float format."""
    text = frame.to_csv(index=False, float_format=float_format, lineterminator="\n")
    return _atomic_write_bytes(Path(path), text.encode("utf-8"))


def write_json(payload: Any, path: Union[str, Path]) -> Path:
    """Write a pydantic model or plain JSON value atomically."""
    if isinstance(payload, BaseModel):
        text = payload.model_dump_json(indent=2)
    else:
        text = json.dumps(payload, indent=2, sort_keys=True, default=str)
    return _atomic_write_bytes(Path(path), (text + "\n").encode("utf-8"))


def file_digest(path: Union[str, Path]) -> str:
    """sha256 hex digest of a file."""
    digest = hashlib.sha256()
    with open(path, "rb") as handle:
        for chunk in iter(lambda: handle.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def spec_digest(spec: ModelSpec) -> bytes:
    """sha256 of the canonical JSON form of a model specification."""
    return hashlib.sha256(spec.canonical_json().encode("utf-8")).digest()


class SpectralCache:
    """On-disk cache of spectral decompositions keyed by model content hash."""

    def __init__(self, directory: Union[str, Path]):
        self.directory = Path(directory)

    def path_for(self, spec: ModelSpec) -> Path:
        """Cache file for a model specification."""
        return self.directory / f"{spec_digest(spec).hex()}{CACHE_SUFFIX}"

    def store(self, spec: ModelSpec, decomp: SpectralDecomposition) -> Path:
        """Write a decomposition for ``spec``."""
        payload = (
            np.ascontiguousarray(decomp.eigenvalues, dtype="<f8").tobytes()
            + np.ascontiguousarray(decomp.eigenvectors, dtype="<f8").tobytes()
        )
        header = _HEADER.pack(
            CACHE_MAGIC,
            CACHE_VERSION,
            decomp.dimension,
            spec_digest(spec),
            hashlib.sha256(payload).digest(),
        )
        path = _atomic_write_bytes(self.path_for(spec), header + payload)
        logger.info(f"Stored spectral cache entry {path.name} (N={decomp.dimension})")
        return path

    def load(self, spec: ModelSpec, dimension: Optional[int] = None) -> Optional[SpectralDecomposition]:
        """
        Read the decomposition for ``spec`` if present.

        Args:
            spec: Model specification the entry must belong to
            dimension: Expected N, checked when given

        Returns:
            SpectralDecomposition, or None when no entry exists

        Raises:
            CacheIntegrityError: On a header, size or digest mismatch
        """
        path = self.path_for(spec)
        if not path.exists():
            return None

        raw = path.read_bytes()
        if len(raw) < _HEADER.size:
            raise CacheIntegrityError(f"Cache file {path.name} is truncated", details={"path": str(path)})
        magic, version, n, key_digest, payload_digest = _HEADER.unpack_from(raw)
        details = {"path": str(path), "dimension": n}
        if magic != CACHE_MAGIC or version != CACHE_VERSION:
            raise CacheIntegrityError(f"Cache file {path.name} has an unknown format", details=details)
        if key_digest != spec_digest(spec):
            raise CacheIntegrityError(f"Cache file {path.name} belongs to another model", details=details)
        if dimension is not None and n != dimension:
            raise CacheIntegrityError(
                f"Cache file {path.name} holds N={n}, expected {dimension}", details=details
            )
        payload = raw[_HEADER.size:]
        if len(payload) != 8 * (n + n * n):
            raise CacheIntegrityError(f"Cache file {path.name} has a wrong payload size", details=details)
        if hashlib.sha256(payload).digest() != payload_digest:
            raise CacheIntegrityError(f"Cache file {path.name} failed its payload digest", details=details)

        data = np.frombuffer(payload, dtype="<f8")
        logger.debug(f"Spectral cache hit {path.name} (N={n})")
        return SpectralDecomposition(
            eigenvalues=data[:n].astype(float),
            eigenvectors=data[n:].reshape(n, n).astype(float),
        )
