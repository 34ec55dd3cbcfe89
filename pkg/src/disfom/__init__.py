"""Dimension-insensitive stochastic first-order optimization.

Proximal stochastic gradient loops with non-smooth l1-geometry penalty
terms, exact subproblem solvers for unconstrained / box / l1-ball feasible
regions, minibatch and recursive variance-reduced gradient estimators, an
ADMM reference solver, a synthetic nonconvex benchmark problem, and a CLI
harness for reproducible experiments.
"""

from .core import (
    Box,
    Euclidean,
    L1BallBox,
    L1BallIndicator,
    L1Squared,
    Polyhedron,
    ResidualReport,
    Unconstrained,
    is_feasible,
    residual_inf,
)
from .errors import (
    BracketError,
    DimensionMismatchError,
    InfeasibleInputError,
    IterationLimitError,
    OracleCapabilityError,
    UnsupportedRegionError,
)
from .prox import (
    ProxSolution,
    QPReformulation,
    bisect_monotone,
    project_l1_ball,
    prox_case2_shifted,
    prox_l1sq_box,
    prox_l1sq_l1box,
    prox_l1sq_unconstrained,
    reformulate_polyhedron_qp,
)
from .sampling import (
    Minibatch,
    Spider,
    SpiderState,
    StochasticOracle,
    minibatch_gradient,
    minibatch_total_evaluations,
    spider_step,
    spider_total_evaluations,
    variance_probe_inf,
)
from .optimizers import (
    HyperparameterPlan,
    PgdResult,
    OptimizerConfig,
    RunTrace,
    SmdConfig,
    TraceRecord,
    disfom_run,
    euclidean_project,
    pgd_backtracking,
    smd_run,
    step_stream,
    suggest_hyperparameters,
)
from .admm import AdmmConfig, AdmmResult, admm_solve_box, admm_solve_l1box
from .problems import (
    SyntheticOracle,
    SyntheticQpInstance,
    SyntheticQpSpec,
    exact_gradient,
    exact_value,
    generate_instance,
    reference_optimum,
    sample_gradient,
    sigma_sq_trunc_normal,
)

__version__ = "0.1.0"
