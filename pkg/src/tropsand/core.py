"""Exact dynamics of the one-dimensional tropical sandpile on [0, 1].

A tropical polynomial F on [0, 1] vanishing at both ends is stored by its
break points and their multiplicities (the slope drop of F at each point).
Every coordinate is an integer numerator over a common denominator ``denom``,
so the only arithmetic the dynamics ever perform is integer ``+``, ``-``,
``min`` and comparison.  Coincidences such as ``2p == a + b`` are exact.
"""

from __future__ import annotations

import math
from bisect import bisect_left
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Optional, Sequence

DEFAULT_DENOM_LOG2 = 62
DEFAULT_DENOM = 1 << DEFAULT_DENOM_LOG2
DEFAULT_MAX_SWEEPS = 10**7
# bulk sampling meets pairs of points 1e-8 apart, whose L exceeds 10**7
BULK_MAX_SWEEPS = 10**10


class SandpileError(ValueError):
    """Base class for invalid inputs to the sandpile dynamics."""


class BoundaryPointError(SandpileError):
    pass


class DuplicatePointsError(SandpileError):
    pass


class InvalidStateError(SandpileError):
    pass


class GuardError(RuntimeError):
    """A relaxation ran past its sweep budget."""


class RelaxationGuardError(GuardError):
    """Raised when a relaxation exceeds ``max_sweeps``.

    Carries the configuration and the state reached so the failure can be
    replayed.
    """

    def __init__(self, cfg: "PointConfig", state: "SandpileState", sweeps: int):
        self.cfg = cfg
        self.state = state
        self.sweeps = sweeps
        super().__init__(
            f"relaxation did not stabilize within {sweeps} sweeps; "
            f"points={cfg.as_fractions()} state={state}"
        )


def common_denominator(values: Iterable[Fraction], base: int = 1) -> int:
    """Smallest multiple of ``base`` on which every value is exactly representable."""
    d = base
    for v in values:
        d = math.lcm(d, Fraction(v).denominator)
    return d


def to_numerator(value, denom: int) -> int:
    v = Fraction(value)
    num = v * denom
    if num.denominator != 1:
        raise SandpileError(f"{v} is not representable with denominator {denom}")
    return num.numerator


@dataclass(frozen=True)
class SandpileState:
    """Break points of an Omega-tropical polynomial with multiplicities.

    ``points`` holds ``(numerator, multiplicity)`` pairs sorted by position.
    The endpoints 0 and 1 are implicit.
    """

    denom: int
    points: tuple[tuple[int, int], ...] = ()

    @classmethod
    def from_fractions(cls, items, denom: Optional[int] = None) -> "SandpileState":
        """Build a state from ``{position: multiplicity}`` or ``[(position, mult), ...]``."""
        pairs = list(items.items()) if isinstance(items, dict) else list(items)
        if denom is None:
            denom = common_denominator((Fraction(h) for h, _ in pairs))
        pts = sorted((to_numerator(h, denom), int(m)) for h, m in pairs)
        return cls(denom, tuple(pts))

    def as_fractions(self) -> list[tuple[Fraction, int]]:
        return [(Fraction(h, self.denom), m) for h, m in self.points]

    def positions(self) -> list[int]:
        return [h for h, _ in self.points]

    def total_multiplicity(self) -> int:
        return sum(m for _, m in self.points)

    def rescale(self, denom: int) -> "SandpileState":
        if denom % self.denom:
            raise SandpileError(f"cannot rescale denominator {self.denom} to {denom}")
        k = denom // self.denom
        return SandpileState(denom, tuple((h * k, m) for h, m in self.points))

    def __eq__(self, other):
        if not isinstance(other, SandpileState):
            return NotImplemented
        return self.as_fractions() == other.as_fractions()

    def __hash__(self):
        return hash(tuple(self.as_fractions()))

    def __str__(self):
        return format_state(self)


def format_state(s: SandpileState, scale=None) -> str:
    """Render as ``{1/9, 4/9 x2}``; ``scale`` maps positions back to another domain."""
    parts = []
    for h, m in s.as_fractions():
        x = scale(h) if scale is not None else h
        parts.append(f"{x} x{m}" if m > 1 else f"{x}")
    return "{" + ", ".join(parts) + "}"


@dataclass(frozen=True)
class PointConfig:
    """Ordered tuple of distinct interior points, stored as numerators over ``denom``."""

    denom: int
    nums: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "nums", tuple(int(x) for x in self.nums))
        for x in self.nums:
            if not 0 < x < self.denom:
                raise BoundaryPointError(
                    f"point {Fraction(x, self.denom)} is not inside (0, 1)"
                )
        if len(set(self.nums)) != len(self.nums):
            raise DuplicatePointsError(
                f"points must be distinct: {[str(p) for p in self.as_fractions()]}"
            )

    @classmethod
    def from_fractions(cls, values: Sequence, denom: Optional[int] = None) -> "PointConfig":
        fr = [Fraction(v) for v in values]
        if denom is None:
            denom = common_denominator(fr)
        return cls(denom, tuple(to_numerator(v, denom) for v in fr))

    def __len__(self):
        return len(self.nums)

    def as_fractions(self) -> list[Fraction]:
        return [Fraction(x, self.denom) for x in self.nums]

    def extended(self, p: int) -> "PointConfig":
        return PointConfig(self.denom, self.nums + (p,))


@dataclass(frozen=True)
class TraceStep:
    sweep: int
    index: int
    point: int
    changed: bool
    state: SandpileState


@dataclass
class RelaxResult:
    final: SandpileState
    sweeps: int
    trace: Optional[list[TraceStep]] = field(default=None, repr=False)


def initial_state(denom: int = DEFAULT_DENOM) -> SandpileState:
    """The zero series: no break points."""
    return SandpileState(denom, ())


def _check_interior(denom: int, p: int) -> None:
    if not 0 < p < denom:
        raise BoundaryPointError(f"point {Fraction(p, denom)} is not inside (0, 1)")


def find_component(s: SandpileState, p: int) -> Optional[tuple[int, int]]:
    """Endpoints ``(a, b)`` of the smooth component containing ``p``.

    Endpoints are numerators; the domain ends are ``0`` and ``s.denom``.
    Returns ``None`` when ``p`` is itself a break point.
    """
    _check_interior(s.denom, p)
    pos = s.positions()
    i = bisect_left(pos, p)
    if i < len(pos) and pos[i] == p:
        return None
    a = pos[i - 1] if i > 0 else 0
    b = pos[i] if i < len(pos) else s.denom
    return a, b


def topple(s: SandpileState, p: int) -> SandpileState:
    """Apply the toppling operator at ``p``.

    The ends ``a < p < b`` of the smooth component around ``p`` each move a
    distance ``c = min(p - a, b - p)`` towards ``p``; interior ends lose one
    unit of multiplicity, the moved ends gain one.  Identity when ``p`` is a
    break point.
    """
    comp = find_component(s, p)
    if comp is None:
        return s
    a, b = comp
    c = min(p - a, b - p)
    pts = s.points
    i = bisect_left(s.positions(), p)
    left = list(pts[: i - 1]) if i > 0 else []
    if i > 0:
        h, m = pts[i - 1]
        if m > 1:
            left.append((h, m - 1))
    right = []
    if i < len(pts):
        h, m = pts[i]
        if m > 1:
            right.append((h, m - 1))
        right.extend(pts[i + 1 :])
    na, nb = a + c, b - c
    middle = [(na, 2)] if na == nb else [(na, 1), (nb, 1)]
    return SandpileState(s.denom, tuple(left + middle + right))


def _coerce(s: SandpileState, cfg: PointConfig) -> SandpileState:
    if s.denom == cfg.denom:
        return s
    return s.rescale(cfg.denom)


def sweep(s: SandpileState, cfg: PointConfig) -> tuple[SandpileState, bool]:
    """Topple at ``p_1``, then ``p_2``, ..., then ``p_n``."""
    if not cfg.nums:
        raise SandpileError("empty point configuration")
    s = _coerce(s, cfg)
    changed = False
    for p in cfg.nums:
        t = topple(s, p)
        if t is not s:
            changed = True
        s = t
    return s, changed


def relax(
    cfg: PointConfig,
    max_sweeps: int = DEFAULT_MAX_SWEEPS,
    trace: bool = False,
    engine: str = "python",
) -> RelaxResult:
    """Sweep from the zero state until a sweep leaves the state unchanged.

    ``sweeps`` counts the sweeps that changed the state, which is the
    relaxation length L.  The trace, when requested, records every topple
    of those sweeps.  ``engine="compiled"`` runs the same loop in the numba
    kernel (no trace, denominators up to 2**62).
    """
    if not cfg.nums:
        raise SandpileError("empty point configuration")
    if engine == "compiled":
        if trace:
            raise ValueError("the compiled engine does not record traces")
        return _relax_compiled(cfg, max_sweeps)
    if engine != "python":
        raise ValueError(f"unknown engine {engine!r}")
    s = initial_state(cfg.denom)
    steps: Optional[list[TraceStep]] = [] if trace else None
    count = 0
    while True:
        changed = False
        recorded = []
        for k, p in enumerate(cfg.nums):
            t = topple(s, p)
            moved = t is not s
            changed |= moved
            s = t
            if trace:
                recorded.append(TraceStep(count + 1, k, p, moved, s))
        if not changed:
            return RelaxResult(s, count, steps)
        count += 1
        if count > max_sweeps:
            raise RelaxationGuardError(cfg, s, max_sweeps)
        if steps is not None:
            steps.extend(recorded)


def _relax_compiled(cfg: PointConfig, max_sweeps: int) -> RelaxResult:
    import numpy as np

    from . import _kernels

    if cfg.denom > DEFAULT_DENOM:
        raise ValueError("the compiled engine needs a denominator of at most 2**62")
    pts = np.array(cfg.nums, dtype=np.int64)
    pos = np.empty(len(pts) + 3, np.int64)
    mult = np.empty(len(pts) + 3, np.int64)
    L, k = _kernels.relax_into(pts, cfg.denom, max_sweeps, pos, mult)
    state = SandpileState(cfg.denom, tuple(zip(pos[:k].tolist(), mult[:k].tolist())))
    if L == _kernels.GUARD:
        raise RelaxationGuardError(cfg, state, max_sweeps)
    if L < 0:
        raise InvalidStateError(f"state buffer overflow relaxing {cfg.as_fractions()}")
    return RelaxResult(state, int(L))


def fractional_q(cfg: PointConfig) -> int:
    """Numerator of the fractional part of ``-(p_1 + ... + p_n)``."""
    return (-sum(cfg.nums)) % cfg.denom


def limit_state(cfg: PointConfig) -> SandpileState:
    """The stable state, built directly from the position of ``fractional_q``."""
    q = fractional_q(cfg)
    mult = dict.fromkeys(cfg.nums, 1)
    if q != 0:
        mult[q] = mult.get(q, 0) + 1
    return SandpileState(cfg.denom, tuple(sorted(mult.items())))


def limit_case(cfg: PointConfig) -> int:
    """1 if the sum of points is integral, 2 if ``q`` hits a point, 3 otherwise."""
    q = fractional_q(cfg)
    if q == 0:
        return 1
    return 2 if q in cfg.nums else 3


def _slope_at_zero(s: SandpileState) -> Fraction:
    return sum((Fraction(m * (s.denom - h), s.denom) for h, m in s.points), Fraction(0))


def evaluate(s: SandpileState, x) -> Fraction:
    """Exact value of the polynomial at ``x``.

    ``F(x) = alpha*x + sum mu(h)*min(0, h - x)`` where ``alpha`` is the slope
    at 0 that makes ``F(1) = 0``.
    """
    x = Fraction(x)
    value = _slope_at_zero(s) * x
    for h, m in s.as_fractions():
        value += m * min(Fraction(0), h - x)
    return value


def is_valid(s: SandpileState) -> bool:
    prev = 0
    for h, m in s.points:
        if not (prev < h < s.denom) or m not in (1, 2):
            return False
        prev = h
    return sum(h * m for h, m in s.points) % s.denom == 0


def boundary_slopes(s: SandpileState) -> tuple[int, int]:
    """Slopes of F at 0 and at 1; their difference is the total multiplicity."""
    alpha = _slope_at_zero(s)
    if alpha.denominator != 1:
        raise InvalidStateError(f"state {s} has non-integral boundary slope {alpha}")
    a = alpha.numerator
    return a, a - s.total_multiplicity()
