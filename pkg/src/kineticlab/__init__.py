"""Numerical laboratory for a kinetic flocking model with local alignment."""

from .errors import (
    ConfigError,
    GridMismatch,
    NegativeDensity,
    NoConvergence,
    NotBlownUp,
    NumericalAbort,
    ParseError,
    SupportClipped,
    ValidationError,
    ZeroWeight,
)
from .fields import constant_in_x, smooth_patch, uniform_patch
from .grid import (
    DistributionField,
    MomentField,
    ObservableRow,
    ObservableSeries,
    PhaseGrid,
    alignment_field,
    h_profile,
    mass_outside_q,
    moments,
    observables,
    production_rates,
    support_mask,
    support_set_Q,
)
from .homogeneous import (
    HomogeneousState,
    alignment_substep,
    exact_characteristic,
    exact_observables,
    exact_solution,
)
from .solver import KineticSolver, PatchGeometry, RunResult, SupportRow, run

__all__ = [
    "ConfigError",
    "GridMismatch",
    "NegativeDensity",
    "NoConvergence",
    "NotBlownUp",
    "NumericalAbort",
    "ParseError",
    "SupportClipped",
    "ValidationError",
    "ZeroWeight",
    "constant_in_x",
    "smooth_patch",
    "uniform_patch",
    "DistributionField",
    "MomentField",
    "ObservableRow",
    "ObservableSeries",
    "PhaseGrid",
    "alignment_field",
    "h_profile",
    "mass_outside_q",
    "moments",
    "observables",
    "production_rates",
    "support_mask",
    "support_set_Q",
    "HomogeneousState",
    "alignment_substep",
    "exact_characteristic",
    "exact_observables",
    "exact_solution",
    "KineticSolver",
    "PatchGeometry",
    "RunResult",
    "SupportRow",
    "run",
]
