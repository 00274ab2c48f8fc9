"""Stateless counter-based generator for reproducible sampling.

Draw ``j`` of trial ``i`` under ``seed`` is a pure function of the triple,
built from the SplitMix64 finalizer.  Trials can therefore be evaluated in
any order, on any number of workers, and any single trial can be replayed.
``_kernels`` carries a compiled twin of :func:`draw`; the two must agree
bit for bit.
"""

from __future__ import annotations

MASK64 = (1 << 64) - 1
GAMMA = 0x9E3779B97F4A7C15
SEED_SALT = 0x632BE59BD9B4E019


def mix64(z: int) -> int:
    z &= MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def trial_key(seed: int, trial: int) -> int:
    s = mix64((seed ^ SEED_SALT) & MASK64)
    return mix64((s + trial * GAMMA) & MASK64)


def draw(seed: int, trial: int, j: int) -> int:
    """64 random bits for draw ``j`` of ``trial``."""
    return mix64((trial_key(seed, trial) + (j + 1) * GAMMA) & MASK64)


def draw_numerator(seed: int, trial: int, j: int, denom_log2: int) -> int:
    """Uniform integer in ``[0, 2**denom_log2)``; callers reject 0."""
    return draw(seed, trial, j) >> (64 - denom_log2)
