"""Reproducible random streams.

All randomness in the package flows through Philox, a named counter-based
bit generator whose streams are stable across numpy versions and platforms.
Independent substreams are keyed by ``(seed, stream_id)`` so that per-pixel
or per-realization work is reproducible regardless of scheduling or worker
count.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1


def substream(seed: int, stream_id: int = 0) -> np.random.Generator:
    """Return the generator for substream ``stream_id`` of ``seed``.

    The same ``(seed, stream_id)`` pair always yields an identical draw
    sequence; distinct pairs yield statistically independent streams.
    """
    key = [int(seed) & _MASK64, int(stream_id) & _MASK64]
    return np.random.Generator(np.random.Philox(key=key))


def derive_seed(rng: np.random.Generator) -> int:
    """Draw a fresh 63-bit seed from ``rng`` for a nested component."""
    return int(rng.integers(0, 2**63 - 1))
