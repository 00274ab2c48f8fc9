"""Relaxation length, the two-point locus areas, mirror symmetry, avalanche intervals."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .core import (
    DEFAULT_MAX_SWEEPS,
    PointConfig,
    SandpileError,
    initial_state,
    limit_state,
    relax,
    sweep,
    fractional_q,
)


class DegenerateConfigurationError(SandpileError):
    """The added point coincides with ``q_n``; the interval is undefined there."""


@dataclass(frozen=True)
class AvalancheInterval:
    lo: Fraction
    hi: Fraction
    # set when q_n = 0, a measure-zero case where (0, 1) is returned
    integral_sum: bool = False

    @property
    def length(self) -> Fraction:
        return self.hi - self.lo

    def __contains__(self, x) -> bool:
        return self.lo < Fraction(x) < self.hi


def length_of_relaxation(
    cfg: PointConfig,
    max_sweeps: int = DEFAULT_MAX_SWEEPS,
    verify: bool = False,
    engine: str = "python",
) -> int:
    """Number of full sweeps needed to reach the stable state.

    With ``verify`` the count is replayed: ``L`` sweeps from zero must land
    on the limit state and ``L - 1`` must not.
    """
    L = relax(cfg, max_sweeps=max_sweeps, engine=engine).sweeps
    if verify:
        target = limit_state(cfg)
        s = initial_state(cfg.denom)
        for k in range(L):
            if s == target:
                raise AssertionError(f"limit reached after {k} < {L} sweeps")
            s, _ = sweep(s, cfg)
        if s != target:
            raise AssertionError(f"{L} sweeps do not reach the limit state")
    return L


def n2_locus_area(N: int) -> Fraction:
    """Area of ``{(p, q) in (0,1)^2 : L(p, q) = N}``."""
    if N < 1:
        raise ValueError(f"N must be >= 1, got {N}")
    if N == 1:
        return Fraction(1, 4)
    return Fraction(
        3 * (9 * N * N - 18 * N + 7),
        (3 * N - 1) * (3 * N - 2) * (3 * N - 4) * (3 * N - 5),
    )


def mirror(cfg: PointConfig) -> PointConfig:
    return PointConfig(cfg.denom, tuple(cfg.denom - p for p in cfg.nums))


def avalanche_interval(cfg: PointConfig, p_new: int) -> AvalancheInterval:
    """Where the stable state changes when ``p_new`` is appended to ``cfg``.

    ``q_n`` is the fractional part of ``-(p_1 + ... + p_n)``; the interval
    is ``(0, q_n)`` for ``p_new < q_n`` and ``(q_n, 1)`` otherwise.
    """
    if not 0 < p_new < cfg.denom:
        raise SandpileError(f"point {Fraction(p_new, cfg.denom)} is not inside (0, 1)")
    q = fractional_q(cfg)
    if p_new == q:
        raise DegenerateConfigurationError(
            f"added point {Fraction(p_new, cfg.denom)} coincides with q_n"
        )
    qf = Fraction(q, cfg.denom)
    if p_new < q:
        return AvalancheInterval(Fraction(0), qf)
    return AvalancheInterval(qf, Fraction(1), integral_sum=(q == 0))
