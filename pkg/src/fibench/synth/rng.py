"""Splittable deterministic randomness.

One 64-bit mixing generator (splitmix64) folds an arbitrary key path --
seed, sequence id, layer id, purpose tag -- into a stream key.  Within
one implementation the derived streams are bit-stable; cross-language
bit-identity of generated data is a non-goal.
"""

from __future__ import annotations

import numpy as np

_MASK = (1 << 64) - 1


def _splitmix64(state: int) -> int:
    state = (state + 0x9E3779B97F4A7C15) & _MASK
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


def _fnv1a64(text: str) -> int:
    h = 0xCBF29CE484222325
    for byte in text.encode("utf-8"):
        h = ((h ^ byte) * 0x100000001B3) & _MASK
    return h


def derive_key(*parts: int | str) -> int:
    """Fold a key path of ints and tags into one 64-bit stream key."""
    state = 0x6A09E667F3BCC908  # arbitrary non-zero start
    for part in parts:
        value = _fnv1a64(part) if isinstance(part, str) else part & _MASK
        state = _splitmix64(state ^ value)
    return state


def generator(*parts: int | str) -> np.random.Generator:
    """Independent numpy generator for the given key path."""
    return np.random.Generator(np.random.PCG64(derive_key(*parts)))
