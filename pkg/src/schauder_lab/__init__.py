"""Numerical laboratory for parabolic Cauchy problems with unbounded coefficients."""

__version__ = "0.1.0"

from .holder_norms import (GridFunction, HolderNormEstimate, ck_alpha_norm, derivative,
                           holder_seminorm, interpolation_inequality_check, sup_norm)
from .operator_model import (HypothesisReport, OperatorSpec, PolyExampleSpec, affine_operator,
                             build_poly_example, check_hypotheses, operator_from_json)
from .truncated_solver import (Trajectory, expanding_ball_solve, localization_split_check,
                               sign_preservation_check, solve_dirichlet, verify_sup_bound)
from .smoothing_lab import SmoothingFit, bernstein_monitor, measure_smoothing
from .inhomogeneous import (ForcedProblem, integral_identity_residual, schauder_ratio,
                            solve_forced, voc_solution)
from .mollification import (gaussian_mollify, hypothesis_preservation_check, mollify_operator,
                            nu_floor, solve_discontinuous)
from .experiments import ExperimentConfig, RunManifest, report, run

__all__ = [
    "GridFunction", "HolderNormEstimate", "ck_alpha_norm", "derivative", "holder_seminorm",
    "interpolation_inequality_check", "sup_norm", "HypothesisReport", "OperatorSpec",
    "PolyExampleSpec", "affine_operator", "build_poly_example", "check_hypotheses",
    "operator_from_json", "Trajectory", "expanding_ball_solve", "localization_split_check",
    "sign_preservation_check", "solve_dirichlet", "verify_sup_bound", "SmoothingFit",
    "bernstein_monitor", "measure_smoothing", "ForcedProblem", "integral_identity_residual",
    "schauder_ratio", "solve_forced", "voc_solution", "gaussian_mollify",
    "hypothesis_preservation_check", "mollify_operator", "nu_floor", "solve_discontinuous",
    "ExperimentConfig", "RunManifest", "report", "run",
]
