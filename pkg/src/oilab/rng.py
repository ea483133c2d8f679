"""Deterministic, splittable random streams.

Every randomized routine in the package draws from a counter-based Philox
generator keyed by ``(seed, stream_id)``.  Streams with distinct ids are
statistically independent, so parallel trials can each own a stream and the
results do not depend on scheduling.  The same ``(seed, stream_id)`` always
reproduces the same draws, on any platform.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1


def stream(seed: int, stream_id: int = 0) -> np.random.Generator:
    """Return the generator for stream ``stream_id`` of the root ``seed``."""
    key = np.array([seed & _MASK64, stream_id & _MASK64], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))
