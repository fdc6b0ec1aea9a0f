"""sfsparse: certified sparse regression on low-rank data.

Solves cardinality-constrained and cardinality-penalized ridge problems by
interval relaxation, recovers feasible sparse points through a linear-program
rounding step, and emits certified upper/lower bounds on the duality gap,
including numerical-rank perturbation bounds.
"""

from .model import (
    BALL,
    CONSTRAINED,
    LOGISTIC,
    PENALIZED,
    PENALTY,
    QUADRATIC,
    ProblemInstance,
    RidgeForm,
    SparsityBudget,
    ball_feasible,
    loss_conjugate,
    loss_gradient,
    loss_value,
    primal_objective,
    rho_bound,
)
from .spectra import (
    SvdFactors,
    compact_svd,
    make_bell_lowrank,
    make_lowrank,
    make_sparse_coef,
    numerical_rank,
)
from .relax import (
    RelaxedSolution,
    SolverOptions,
    dual_bound,
    extract_dual_point,
    penalized_selector,
    reverse_huber,
    solve_relaxation,
    sum_top_k,
    waterfill_selector,
)
from .lp import LpProblem, LpSolution, lp_feasible_with_slack, lp_solve
from .recovery import AllTrialsInfeasible, PrimalPoint, primalize, recovery_lp, round_selector
from .oracle import EnumerationTooLarge, OracleResult, exact_solve, restricted_minimize
from .certificates import GapCertificate, certified_solve, certify, full_rank_bounds, perturbation_bounds
from .estimators import SparseRidgeClassifier, SparseRidgeRegressor

__version__ = "0.1.0"

__all__ = [
    "BALL", "CONSTRAINED", "LOGISTIC", "PENALIZED", "PENALTY", "QUADRATIC",
    "ProblemInstance", "RidgeForm", "SparsityBudget",
    "ball_feasible", "loss_conjugate", "loss_gradient", "loss_value",
    "primal_objective", "rho_bound",
    "SvdFactors", "compact_svd", "make_bell_lowrank", "make_lowrank",
    "make_sparse_coef", "numerical_rank",
    "RelaxedSolution", "SolverOptions", "dual_bound", "extract_dual_point",
    "penalized_selector", "reverse_huber", "solve_relaxation", "sum_top_k",
    "waterfill_selector",
    "LpProblem", "LpSolution", "lp_feasible_with_slack", "lp_solve",
    "AllTrialsInfeasible", "PrimalPoint", "primalize", "recovery_lp", "round_selector",
    "EnumerationTooLarge", "OracleResult", "exact_solve", "restricted_minimize",
    "GapCertificate", "certified_solve", "certify", "full_rank_bounds", "perturbation_bounds",
    "SparseRidgeClassifier", "SparseRidgeRegressor",
    "__version__",
]
