"""Periodic orbits of delay differential equations by piecewise
polynomial collocation on a spectral-element mesh.

Usual entry points: ``get_problem`` for the shipped equations,
``newton_solve`` for one orbit, ``continue_branch`` to follow a branch
in a parameter, ``convergence_study`` for error tables, and
``phi_m_defect`` as an independent check of a converged state.
"""

from .analysis import (
    BernsteinBound,
    CircleMapResult,
    ConvergenceCell,
    ConvergenceTable,
    bernstein_bound_fit,
    circle_map_analysis,
    convergence_study,
    orbit_amplitude,
    orbit_lag_map,
    residual_err,
)
from .collocation import (
    DiscreteState,
    NewtonResult,
    NewtonSettings,
    default_constraints,
    newton_solve,
    resample_state,
    state_from_document,
    state_to_document,
    with_parameter,
)
from .continuation import (
    BranchPoint,
    HopfData,
    continue_branch,
    hopf_initial_guess,
    mackey_glass_hopf,
    scalar_hopf_point,
    sd_quadratic_seed,
)
from .errors import (
    AnalyticityViolationError,
    ConfigError,
    FormatVersionError,
    InvalidArgumentError,
    MaxIterExceededError,
    NegativeDelayError,
    NewtonError,
    NoHopfError,
    NonFiniteResidualError,
    OutOfWindowError,
    SemDdeError,
    SingularJacobianError,
    StepFailureError,
)
from .nodes import NodeFamily, NodeKind, gauss_weights, lebesgue_constant, \
    make_nodes
from .oracle import FixedPointDefect, phi_m_defect
from .piecewise import (
    FORMAT_VERSION,
    Mesh,
    PeriodicPiecewisePoly,
    PiecewiseProjection,
    project,
    sample_periodic,
)
from .problems import DdeProblem, get_problem, mackey_glass, sd_quadratic

__version__ = "0.1.0"

__all__ = [
    "AnalyticityViolationError",
    "BernsteinBound",
    "BranchPoint",
    "CircleMapResult",
    "ConfigError",
    "ConvergenceCell",
    "ConvergenceTable",
    "DdeProblem",
    "DiscreteState",
    "FORMAT_VERSION",
    "FixedPointDefect",
    "FormatVersionError",
    "HopfData",
    "InvalidArgumentError",
    "MaxIterExceededError",
    "Mesh",
    "NegativeDelayError",
    "NewtonError",
    "NewtonResult",
    "NewtonSettings",
    "NoHopfError",
    "NodeFamily",
    "NodeKind",
    "NonFiniteResidualError",
    "OutOfWindowError",
    "PeriodicPiecewisePoly",
    "PiecewiseProjection",
    "SemDdeError",
    "SingularJacobianError",
    "StepFailureError",
    "bernstein_bound_fit",
    "circle_map_analysis",
    "continue_branch",
    "convergence_study",
    "default_constraints",
    "gauss_weights",
    "get_problem",
    "hopf_initial_guess",
    "lebesgue_constant",
    "mackey_glass",
    "mackey_glass_hopf",
    "make_nodes",
    "newton_solve",
    "orbit_amplitude",
    "orbit_lag_map",
    "phi_m_defect",
    "project",
    "resample_state",
    "residual_err",
    "sample_periodic",
    "scalar_hopf_point",
    "sd_quadratic",
    "sd_quadratic_seed",
    "state_from_document",
    "state_to_document",
    "with_parameter",
    "__version__",
]
