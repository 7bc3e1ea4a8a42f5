"""Multigrid reduction in time applied to fixed-step optimization methods.

The iteration axis of gradient descent and its proximal variants is treated
as a time axis and solved with MGRIT; see the README for the model problems
and the command-line front end.
"""

from .analysis import (check_lemma_bound, check_residual_bound_dense, convergence_envelope,
                       extract_figure_data)
from .kernels import backend, set_backend, use_backend
from .linalg import LaplacianOperator, build_laplacian, power_iteration
from .mgrit import (ConvergenceReport, IterationHierarchy, MGRITConfig, SpaceIterationState,
                    adaptive_horizon_solve, mgrit_solve)
from .problems import (ProblemInstance, build_mp1, build_mp2, build_problem,
                       exact_solution_mp2_1d, obstacle, unshift)
from .propagators import GeneralizedGradientEvaluator, Kind, Propagator, prox_penalty
from .sequential import Trajectory, run_sequential
from .speedup import (optimal_m_2level, optimal_m_3level, s2, s2_optimal, s3,
                      SpeedupEstimate, measure_alpha)

__version__ = "0.1.0"

__all__ = [
    "ConvergenceReport", "GeneralizedGradientEvaluator", "IterationHierarchy", "Kind",
    "LaplacianOperator", "MGRITConfig", "ProblemInstance", "Propagator",
    "SpaceIterationState", "SpeedupEstimate", "Trajectory", "adaptive_horizon_solve",
    "backend", "build_laplacian", "build_mp1", "build_mp2", "build_problem",
    "check_lemma_bound", "check_residual_bound_dense", "convergence_envelope",
    "exact_solution_mp2_1d", "extract_figure_data", "measure_alpha", "mgrit_solve",
    "obstacle", "optimal_m_2level", "optimal_m_3level", "power_iteration", "prox_penalty",
    "run_sequential", "s2", "s2_optimal", "s3", "set_backend", "unshift", "use_backend",
]
