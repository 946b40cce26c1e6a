"""Deterministic random-stream derivation.

Parallel estimators split work into chunks; each chunk gets its own
generator derived from (master_seed, chunk_index) so results do not
depend on how chunks are assigned to workers.  The derivation is a
counter-mode split: the 64-bit index is folded into the seed with the
golden-gamma increment and passed twice through the splitmix64 avalanche
permutation.  Distinct (seed, index) pairs therefore map to distinct
counters before mixing, and the mixed output drives a fresh PCG64 state.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1
_GOLDEN_GAMMA = 0x9E3779B97F4A7C15


def _splitmix64(z: int) -> int:
    z &= _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (z ^ (z >> 31)) & _MASK64


def stream_state(master_seed: int, index: int) -> int:
    """64-bit state for substream `index` of `master_seed`."""
    if index < 0:
        raise ValueError("stream index must be nonnegative")
    counter = (int(master_seed) + _GOLDEN_GAMMA * (int(index) + 1)) & _MASK64
    return _splitmix64(_splitmix64(counter) ^ _GOLDEN_GAMMA)


def derive_stream(master_seed: int, index: int) -> np.random.Generator:
    """Independent generator for worker/trial `index` under `master_seed`."""
    return np.random.Generator(np.random.PCG64(stream_state(master_seed, index)))
