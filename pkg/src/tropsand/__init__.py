"""Exact simulation of the one-dimensional tropical sandpile."""

__version__ = "0.1.0"

from .core import (  # noqa: E402
    DEFAULT_DENOM,
    DEFAULT_DENOM_LOG2,
    DEFAULT_MAX_SWEEPS,
    BoundaryPointError,
    DuplicatePointsError,
    GuardError,
    InvalidStateError,
    PointConfig,
    RelaxationGuardError,
    RelaxResult,
    SandpileError,
    SandpileState,
    boundary_slopes,
    evaluate,
    find_component,
    fractional_q,
    initial_state,
    is_valid,
    limit_case,
    limit_state,
    relax,
    sweep,
    topple,
)
from .observables import (  # noqa: E402
    AvalancheInterval,
    DegenerateConfigurationError,
    avalanche_interval,
    length_of_relaxation,
    mirror,
    n2_locus_area,
)
