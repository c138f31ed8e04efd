"""Black-box convex optimization with politicians.

A politician sits between a first-order method and the objective: the
method asks for a point x, the politician answers with a point y whose
value is no worse, together with f(y) and its gradient.  The identity
("oracle") politician reproduces the plain method; the geometric
politician localizes the minimum inside an intersection of balls built
from strong-convexity certificates and answers from barrier centers of
that region.
"""

from .engine import (Answer, ContractViolationError, EvalCounter,
                     EvaluationError, FirstOrderRecord, History, Objective,
                     OraclePolitician, RunTrace, StationaryPoint, TraceStep,
                     run)
from .subspace import SubspaceBasis, SubspaceError
from .region import (Ball, BallRegion, MarginResult, RegionInfeasibleError,
                     ball_from_record, build_region, feasibility_margin,
                     interior_point, largest_feasible_alpha)
from .barriers import (CenterResult, analytic_grad_hess, analytic_value,
                       newton_center, volumetric_grad, volumetric_hess,
                       volumetric_value)
from .methods import (BFGSMethod, CGMethod, EmptyMethod, GeometricPolitician,
                      GKMethod, LineSearchDivergenceError, LineSearchResult,
                      PoliticianStats, SDMethod, exact_line_search)
from .problems import (HingeProblem, ParseError, QuadraticProblem,
                       SparseDataset, chain_objective, dataset_to_matrix,
                       hinge_objective, make_hinge_synthetic, parse_libsvm,
                       quadratic_objective, random_quadratic,
                       serialize_libsvm)
from .bench import (BenchConfig, ConfigError, ProfileCurve, ProfileError,
                    REGISTRY, performance_profile, run_suite)

__version__ = "0.1.0"

__all__ = [
    "Answer", "ContractViolationError", "EvalCounter", "EvaluationError",
    "FirstOrderRecord", "History", "Objective", "OraclePolitician",
    "RunTrace", "StationaryPoint", "TraceStep", "run",
    "SubspaceBasis", "SubspaceError",
    "Ball", "BallRegion", "MarginResult", "RegionInfeasibleError",
    "ball_from_record", "build_region", "feasibility_margin",
    "interior_point", "largest_feasible_alpha",
    "CenterResult", "analytic_grad_hess", "analytic_value", "newton_center",
    "volumetric_grad", "volumetric_hess", "volumetric_value",
    "BFGSMethod", "CGMethod", "EmptyMethod", "GeometricPolitician",
    "GKMethod", "LineSearchDivergenceError", "LineSearchResult",
    "PoliticianStats", "SDMethod", "exact_line_search",
    "HingeProblem", "ParseError", "QuadraticProblem", "SparseDataset",
    "chain_objective", "dataset_to_matrix", "hinge_objective",
    "make_hinge_synthetic", "parse_libsvm", "quadratic_objective",
    "random_quadratic", "serialize_libsvm",
    "BenchConfig", "ConfigError", "ProfileCurve", "ProfileError",
    "REGISTRY", "performance_profile", "run_suite",
    "__version__",
]
