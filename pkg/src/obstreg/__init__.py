"""Numerical one-dimensional variational obstacle problems.

Minimize ``J(u) = int_a^b L(x, u, u') dx`` over piecewise-linear ``u`` with
``f <= u <= g`` and pinned endpoints, then test the computed minimizer
against quantitative regularity machinery: admissible-class membership,
the constants pipeline, Dini-type obstacle conditions and a refinement-based
singular-set diagnostic.
"""

__version__ = "0.1.0"

from .errors import (
    DegenerateBox, DegeneratePair, EmptyGrid, InfeasibleSpec, NoSuchM, NonFinite,
    ObstregError, ParseError, QuadratureUnderflow, SolverFailed, ValidationError,
)
from .expr import Expression
from .grid import GridFunction
from .lagrangian import CompactBox, Lagrangian, estimate_holder
from .obstacles import (
    DiniResult, Modulus, ObstaclePair, condition_1_2_suite, dini_test, estimate_modulus,
    obstacle_omega, required_thetas,
)
from .quadrature import log_integral
from .regularity import (
    RegularityReport, ReportOptions, build_theory, singular_candidates, tonelli_report,
)
from .scenario import Scenario, parse_scenario
from .theory import (
    DeltaPipeline, TheoryConstants, build_constants, compute_M_k, compute_N, little_delta,
    max_delta0, picard_fixed_point,
)
from .variational import (
    ProblemSpec, SolveResult, check_A1, check_A2, check_A3, chord_slope, clip_to_admissible,
    functional, linear_replace, solve, taut_string_oracle,
)

__all__ = [
    "__version__", "DegenerateBox", "DegeneratePair", "EmptyGrid", "InfeasibleSpec", "NoSuchM",
    "NonFinite", "ObstregError", "ParseError", "QuadratureUnderflow", "SolverFailed",
    "ValidationError", "Expression", "GridFunction", "CompactBox", "Lagrangian",
    "estimate_holder", "DiniResult", "Modulus", "ObstaclePair", "condition_1_2_suite",
    "dini_test", "estimate_modulus", "obstacle_omega", "required_thetas", "log_integral",
    "RegularityReport", "ReportOptions", "build_theory", "singular_candidates",
    "tonelli_report", "Scenario", "parse_scenario", "DeltaPipeline", "TheoryConstants",
    "build_constants", "compute_M_k", "compute_N", "little_delta", "max_delta0",
    "picard_fixed_point", "ProblemSpec", "SolveResult", "check_A1", "check_A2", "check_A3",
    "chord_slope", "clip_to_admissible", "functional", "linear_replace", "solve",
    "taut_string_oracle",
]
