"""Seeded sampling of random configurations and statistics of relaxation length.

Each trial draws its points from a counter-based stream keyed by
``(master_seed, trial_index)``, so results do not depend on chunking or on
the number of worker threads.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

import numpy as np

from . import _kernels, rng
from .core import (
    DEFAULT_DENOM_LOG2,
    BULK_MAX_SWEEPS,
    GuardError,
    PointConfig,
    RelaxationGuardError,
    relax,
)

CHUNK = 1 << 20
MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class TrialConfig:
    n: int
    trials: int
    master_seed: int = 0
    denominator_log2: int = DEFAULT_DENOM_LOG2
    max_sweeps: int = BULK_MAX_SWEEPS

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if not 2 <= self.denominator_log2 <= 62:
            raise ValueError("denominator_log2 must lie in [2, 62]")


class TrialGuardError(GuardError):
    def __init__(self, trial_index: int, cfg: TrialConfig):
        self.trial_index = trial_index
        self.cfg = cfg
        super().__init__(
            f"trial {trial_index} (n={cfg.n}, seed={cfg.master_seed}) did not "
            f"stabilize within {cfg.max_sweeps} sweeps"
        )


@dataclass
class LHistogram:
    counts: dict[int, int] = field(default_factory=dict)
    total: int = 0

    @classmethod
    def from_lengths(cls, lengths) -> "LHistogram":
        keys, cnt = np.unique(np.asarray(lengths), return_counts=True)
        return cls({int(k): int(c) for k, c in zip(keys, cnt)}, int(cnt.sum()))

    def merge(self, other: "LHistogram") -> "LHistogram":
        merged = Counter(self.counts)
        merged.update(other.counts)
        return LHistogram(dict(sorted(merged.items())), self.total + other.total)

    def frequency(self, L: int) -> float:
        return self.counts.get(L, 0) / self.total

    def items(self):
        return sorted(self.counts.items())


@dataclass
class CcdfTable:
    rows: list[tuple[int, Fraction]]

    def as_arrays(self):
        N = np.array([r[0] for r in self.rows], dtype=float)
        P = np.array([float(r[1]) for r in self.rows])
        return N, P


@dataclass
class TailFit:
    ccdf_slope: float
    pmf_exponent: float
    intercept: float
    n_min: int
    n_max: int
    residual: float
    points: int


@dataclass
class AvalancheStats:
    n: int
    trials: int
    lengths: np.ndarray = field(repr=False)
    bin_edges: np.ndarray = field(repr=False)
    density: np.ndarray = field(repr=False)
    mean: float = 0.0
    var: float = 0.0
    resampled: int = 0


def set_workers(workers: Optional[int]) -> None:
    import numba

    if workers:
        numba.set_num_threads(max(1, min(workers, numba.config.NUMBA_NUM_THREADS)))


def sample_config(
    n: int, trial_index: int, master_seed: int, denom_log2: int = DEFAULT_DENOM_LOG2
) -> PointConfig:
    """``n`` distinct numerators uniform on ``{1, ..., D-1}``; zero and repeats are redrawn."""
    seed = master_seed & MASK64
    pts: list[int] = []
    j = 0
    while len(pts) < n:
        x = rng.draw_numerator(seed, trial_index, j, denom_log2)
        j += 1
        if x and x not in pts:
            pts.append(x)
    return PointConfig(1 << denom_log2, tuple(pts))


def sample_block(
    n: int, start: int, count: int, master_seed: int, denom_log2: int = DEFAULT_DENOM_LOG2
) -> np.ndarray:
    """Numerators of trials ``start .. start+count-1``, one row per trial."""
    return _kernels.sample_block(n, start, count, np.uint64(master_seed & MASK64), denom_log2)


def trial_lengths(cfg: TrialConfig, start: int = 0, count: Optional[int] = None) -> np.ndarray:
    """L for trials ``start .. start+count-1``; guard trips raise with the trial index."""
    count = cfg.trials - start if count is None else count
    out = _kernels.trial_lengths(
        cfg.n, start, count, np.uint64(cfg.master_seed & MASK64),
        cfg.denominator_log2, cfg.max_sweeps,
    )
    bad = np.flatnonzero(out < 1)
    if bad.size:
        raise TrialGuardError(start + int(bad[0]), cfg)
    return out


def run_trials(cfg: TrialConfig, engine: str = "compiled") -> LHistogram:
    if engine == "python":
        lengths = []
        for t in range(cfg.trials):
            pc = sample_config(cfg.n, t, cfg.master_seed, cfg.denominator_log2)
            try:
                lengths.append(relax(pc, max_sweeps=cfg.max_sweeps).sweeps)
            except RelaxationGuardError:
                raise TrialGuardError(t, cfg) from None
        return LHistogram.from_lengths(lengths)
    hist = LHistogram()
    for start in range(0, cfg.trials, CHUNK):
        count = min(CHUNK, cfg.trials - start)
        hist = hist.merge(LHistogram.from_lengths(trial_lengths(cfg, start, count)))
    return hist


def ccdf(h: LHistogram) -> CcdfTable:
    """``P(L >= N)`` at every support point, as exact fractions."""
    if h.total == 0:
        raise ValueError("empty histogram")
    rows = []
    remaining = h.total
    for L, c in h.items():
        rows.append((L, Fraction(remaining, h.total)))
        remaining -= c
    return CcdfTable(rows)


def fit_tail(c: CcdfTable, n_min: int, n_max: int) -> TailFit:
    """Least squares line through ``(log N, log P(L >= N))`` for ``n_min <= N <= n_max``.

    The pmf exponent is reported as the CCDF slope minus one.
    """
    sel = [(N, P) for N, P in c.rows if n_min <= N <= n_max and P > 0]
    if len(sel) < 3:
        raise ValueError(
            f"need at least 3 support points in [{n_min}, {n_max}], found {len(sel)}"
        )
    x = np.log([float(N) for N, _ in sel])
    y = np.log([float(P) for _, P in sel])
    slope, intercept = np.polyfit(x, y, 1)
    resid = float(np.sqrt(np.mean((y - (slope * x + intercept)) ** 2)))
    return TailFit(
        float(slope), float(slope - 1), float(intercept),
        int(sel[0][0]), int(sel[-1][0]), resid, len(sel),
    )


def avalanche_trials(cfg: TrialConfig, bins: int = 100) -> AvalancheStats:
    """Lengths of the avalanche interval when an (n+1)-th uniform point is added."""
    D = 1 << cfg.denominator_log2
    parts, resampled = [], 0
    for start in range(0, cfg.trials, CHUNK):
        count = min(CHUNK, cfg.trials - start)
        nums, extra = _kernels.avalanche_lengths(
            cfg.n, start, count, np.uint64(cfg.master_seed & MASK64), cfg.denominator_log2
        )
        parts.append(nums)
        resampled += int(extra.sum())
    lengths = np.concatenate(parts).astype(np.float64) / D
    density, edges = np.histogram(lengths, bins=bins, range=(0.0, 1.0), density=True)
    return AvalancheStats(
        cfg.n, cfg.trials, lengths, edges, density,
        float(lengths.mean()), float(lengths.var()), resampled,
    )


def ks_distance_square_law(samples) -> float:
    """Kolmogorov-Smirnov distance between the empirical CDF and ``x**2`` on [0, 1]."""
    x = np.sort(np.asarray(samples, dtype=float))
    n = x.size
    F = x * x
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - F), np.max(F - (i - 1) / n)))


def ks_critical(n: int, alpha: float = 0.01) -> float:
    """Asymptotic one-sample critical value, ``1.628/sqrt(n)`` at 1%."""
    return math.sqrt(-0.5 * math.log(alpha / 2)) / math.sqrt(n)
