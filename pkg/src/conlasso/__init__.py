"""Sparse regression and classification under linear equality constraints.

Six formulations (least squares, Huber, their concomitant-scale variants,
squared hinge and huberized hinge) penalized by a weighted l1 norm and
solved subject to ``C beta = 0``, with a homotopy path solver, three
proximal splitting schemes and model selection by cross-validation or
stability selection.
"""
from ._backend import BACKEND
from .data import (Dataset, DatasetOptions, SyntheticSpec, load_dataset, random_data,
                   save_results)
from .errors import (ConlassoError, DegeneratePath, FoldTooSmall, IncompatibleMethodError,
                     MaxBreakpointsExceeded, MaxIterExceeded, ProblemValidationError,
                     SubsampleTooSmall)
from .path import PathResult, path_alg, path_solve
from .problem import (Formulation, Kind, ProblemData, Solution, concomitant_sigma,
                      huber_concomitant_sigma, huber_value, huberized_hinge_value,
                      objective_value, squared_hinge_value, validate)
from .prox import (AugmentedProblem, ConstraintFactorization, factor_constraints,
                   mean_shift_augment, prox_perspective_sq, soft_threshold, spectral_norm_sq)
from .rng import SplitMix64
from .selection import (CVPlan, CVResult, CVRule, FixedLambdaPlan, ModelSelectionPlan, PathPlan,
                        StabSelMode, StabSelPlan, StabSelResult, default_method_for, run_cv,
                        run_fixed_lambda, run_path, run_stability_selection)
from .solvers import (COMPATIBILITY, Method, SolverConfig, compute_lambda_max,
                      douglas_rachford, kkt_residual, oracle_solve, pfpds, ppds)

__version__ = "0.1.0"
