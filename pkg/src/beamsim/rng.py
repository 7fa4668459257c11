"""Deterministic seed derivation for independent substreams.

All stochastic stages (UE placement, ray draws, channel noise, batch
shuffling) consume ``numpy.random.default_rng`` generators seeded through
``derive_seed``.  Substreams are derived from a global 64-bit seed plus a
tuple of integer indices by chaining the splitmix64 finalizer, so the same
(seed, indices) pair yields the same stream on every platform and the
streams for different indices are statistically independent.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def splitmix64(state: int) -> int:
    """One splitmix64 finalizer step; returns the mixed 64-bit value."""
    z = (state + _GOLDEN) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (z ^ (z >> 31)) & _MASK64


def derive_seed(seed: int, *indices: int) -> int:
    """Derive a 64-bit substream seed from a global seed and index path.

    Each index is folded into the state with one splitmix64 round, so
    derive_seed(s, a, b) == derive_seed(derive_seed(s, a), b).
    """
    state = seed & _MASK64
    for idx in indices:
        state = splitmix64(state ^ (idx & _MASK64))
    return state


def substream(seed: int, *indices: int) -> np.random.Generator:
    """A fresh PCG64 generator for the derived substream."""
    return np.random.default_rng(derive_seed(seed, *indices))
