"""Deterministic seeding: one 64-bit seed fans out per sweep point."""

from __future__ import annotations

import numpy as np

__all__ = ["rng_for"]


def rng_for(seed: int, index: int = 0) -> np.random.Generator:
    """Counter-split generator: same (seed, index) always yields the same stream."""
    return np.random.Generator(np.random.Philox(key=seed & (2**64 - 1), counter=[0, 0, 0, index]))
