"""
Named, seedable and splittable random streams.

Streams are derived from a master seed and a tuple of integer keys through
``numpy.random.SeedSequence`` so that independent jobs never share draws
and the execution order of parallel jobs cannot change results.
"""
import hashlib
from typing import Union

import numpy as np

StreamKey = Union[int, str]

# Stream names used across the package
HAMILTONIAN_STREAM = "hamiltonian"
INITIAL_STATE_STREAM = "initial_state"
MONTE_CARLO_STREAM = "monte_carlo"


def _key_to_int(key: StreamKey) -> int:
    """Map a stream key to a stable non-negative integer."""
    if isinstance(key, int):
        if key < 0:
            raise ValueError(f"Stream keys must be non-negative, got {key}")
        return key
    digest = hashlib.sha256(key.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def seed_sequence(seed: int, *keys: StreamKey) -> np.random.SeedSequence:
    """Build the seed sequence for ``seed`` and a path of stream keys."""
    return np.random.SeedSequence(entropy=seed, spawn_key=tuple(_key_to_int(k) for k in keys))


def stream(seed: int, *keys: StreamKey) -> np.random.Generator:
    """
    Get an independent PCG64 generator.

    Args:
        seed: Master seed
        keys: Stream path, e.g. ("initial_state", experiment_id, seed_index)

    Returns:
        Generator whose draws depend only on (seed, keys)
    """
    return np.random.Generator(np.random.PCG64(seed_sequence(seed, *keys)))
