"""Stochastic first-order loops built on the prox solvers and estimators.

The main loop iterates x^{k+1} = P^k(x^k - eta * G^k), where P^k solves the
proximal projection subproblem for the configured penalty term, and returns
x^{Y+1} for an output index Y drawn uniformly from {1, ..., K}.  A mirror
descent variant with an l_p distance generating function and a deterministic
projected-gradient reference solver are included as baselines.

Randomness is organized as one substream per step, derived from the master
seed, so runs are bit-reproducible regardless of scheduling:
``step_stream(seed, k)`` is the stream consumed entirely by step k, and
stream 0 draws the output index.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from math import ceil, exp, log
from typing import Callable, Literal

import numpy as np

from .core import (
    Box,
    Euclidean,
    FeasibleRegion,
    L1BallBox,
    L1BallIndicator,
    L1Squared,
    ProxTerm,
    Unconstrained,
    as_vector,
    is_feasible,
    residual_inf,
)
from .errors import InfeasibleInputError, IterationLimitError, UnsupportedRegionError
from .prox import (
    bisect_monotone,
    prox_case2_shifted,
    prox_l1sq_box,
    prox_l1sq_l1box,
    prox_l1sq_unconstrained,
)
from .sampling import (
    EstimatorConfig,
    Minibatch,
    Spider,
    SpiderState,
    StochasticOracle,
    minibatch_gradient,
    spider_step,
)

__all__ = [
    "OptimizerConfig",
    "SmdConfig",
    "TraceRecord",
    "RunTrace",
    "HyperparameterPlan",
    "PgdResult",
    "step_stream",
    "euclidean_project",
    "disfom_run",
    "smd_run",
    "pgd_backtracking",
    "suggest_hyperparameters",
    "case1_subgradient",
]

FEASIBILITY_TOL = 1e-9

OutputRule = Literal["random_uniform", "last"]

# (penalty term, region) pairs with a registered subproblem solver.
_REGISTERED: set[tuple[type, type]] = {
    (L1Squared, Unconstrained),
    (L1Squared, Box),
    (L1Squared, L1BallBox),
    (L1BallIndicator, Unconstrained),
    (L1BallIndicator, Box),
    (Euclidean, Unconstrained),
    (Euclidean, Box),
}


@dataclass(frozen=True)
class OptimizerConfig:
    eta: float
    K: int
    prox: ProxTerm
    estimator: EstimatorConfig
    region: FeasibleRegion
    seed: int
    record_every: int = 1
    output_rule: OutputRule = "random_uniform"

    def __post_init__(self):
        if not (self.eta > 0):
            raise ValueError("eta must be positive")
        if int(self.K) < 1:
            raise ValueError("K must be >= 1")
        if int(self.record_every) < 1:
            raise ValueError("record_every must be >= 1")
        if self.output_rule not in ("random_uniform", "last"):
            raise ValueError(f"unknown output rule {self.output_rule!r}")
        object.__setattr__(self, "K", int(self.K))
        object.__setattr__(self, "record_every", int(self.record_every))
        object.__setattr__(self, "seed", int(self.seed))


@dataclass(frozen=True)
class SmdConfig:
    """Mirror-descent settings: omega(x) = (C/2) ||x||_p^2 with step alpha.

    ``subproblem_tol`` bounds the bracket width of the scalar root problem
    each mirror step reduces to (relative to the unconstrained norm level).
    """

    p_exponent: float
    strong_convexity_scale: float
    step: float
    subproblem_tol: float = 1e-8
    max_inner: int = 100_000

    def __post_init__(self):
        if not (1.0 < self.p_exponent <= 2.0):
            raise ValueError("p_exponent must lie in (1, 2]")
        if not (self.strong_convexity_scale > 0 and self.step > 0):
            raise ValueError("scale and step must be positive")
        if not (self.subproblem_tol > 0):
            raise ValueError("subproblem_tol must be positive")


@dataclass(frozen=True)
class TraceRecord:
    k: int
    objective: float
    residual: float
    step_l1: float
    wall_time: float
    samples: int
    inner_iterations: int = 0


@dataclass(frozen=True)
class RunTrace:
    records: tuple[TraceRecord, ...]
    Y: int
    output: np.ndarray
    final: np.ndarray
    total_evaluations: int
    config: OptimizerConfig
    extra: dict = field(default_factory=dict)


def step_stream(seed: int, k: int) -> np.random.Generator:
    """Independent substream for step k of a run with the given master seed.

    Stream 0 is reserved for the output-index draw; gradient sampling for
    step k >= 1 consumes stream k.  Streams are stable across platforms and
    schedulings, which is what makes parallel replications reproducible.
    """
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(k,)))


def euclidean_project(v, region: FeasibleRegion) -> np.ndarray:
    """Euclidean projection: identity for R^d, per-coordinate clip on a box."""
    v = as_vector(v, "v")
    if isinstance(region, Unconstrained):
        return v
    if isinstance(region, Box):
        return np.clip(v, region.lower, region.upper)
    raise UnsupportedRegionError("euclidean_project supports Unconstrained and Box")


def _draw_output_index(cfg: OptimizerConfig) -> int:
    if cfg.output_rule == "last":
        return cfg.K
    rng = step_stream(cfg.seed, 0)
    return int(rng.integers(1, cfg.K + 1))


def _proximal_step(x: np.ndarray, v: np.ndarray, prox: ProxTerm, region: FeasibleRegion):
    """Solve the step subproblem argmin_{z in X} 0.5||z - v||^2 + phi(z - x).

    The penalty is centered at the current iterate, while the prox solvers
    are origin-centered: shift coordinates by x (and the box bounds / ball
    center with them), solve, then shift back.
    """
    if isinstance(prox, Euclidean):
        return euclidean_project(v, region)
    if isinstance(prox, L1Squared):
        v_shift = v - x
        if isinstance(region, Unconstrained):
            sol = prox_l1sq_unconstrained(v_shift, prox.rho_hat)
        elif isinstance(region, Box):
            sol = prox_l1sq_box(
                v_shift, prox.rho_hat, region.lower - x, region.upper - x
            )
        elif isinstance(region, L1BallBox):
            sol = prox_l1sq_l1box(
                v_shift,
                prox.rho_hat,
                region.center - x,
                region.radius,
                region.lower - x,
                region.upper - x,
            )
        else:
            raise UnsupportedRegionError(f"no solver for {type(region).__name__}")
        return x + sol.z
    if isinstance(prox, L1BallIndicator):
        sol = prox_case2_shifted(v, x, prox.psi, region)
        return sol.z
    raise UnsupportedRegionError(f"unknown proximal term {type(prox).__name__}")


def _record_metrics(oracle: StochasticOracle, x: np.ndarray, region: FeasibleRegion):
    objective = oracle.exact_value(x) if oracle.has_exact_value else float("nan")
    residual = float("nan")
    if oracle.has_exact_gradient and isinstance(region, (Unconstrained, Box)):
        residual = residual_inf(x, oracle.exact_gradient(x), region).residual_inf
    return objective, residual


def _estimator_step(oracle, x, cfg: OptimizerConfig, state, k: int):
    """One gradient estimate; returns (G, state, evaluations consumed)."""
    rng = step_stream(cfg.seed, k)
    est = cfg.estimator
    if isinstance(est, Minibatch):
        return minibatch_gradient(oracle, x, est.m, rng), None, est.m
    if isinstance(est, Spider):
        refresh = (k - 1) % est.q0 == 0
        G, state = spider_step(oracle, x, state, est, rng)
        return G, state, est.m1 if refresh else 2 * est.m
    raise TypeError(f"unknown estimator {type(est).__name__}")


def _run_loop(
    oracle: StochasticOracle,
    x1,
    cfg: OptimizerConfig,
    advance: Callable[[np.ndarray, np.ndarray], tuple[np.ndarray, int]],
) -> RunTrace:
    x = as_vector(x1, "x1")
    if not is_feasible(x, cfg.region, FEASIBILITY_TOL):
        raise InfeasibleInputError("x1 is not feasible")
    Y = _draw_output_index(cfg)
    t0 = time.perf_counter()
    state: SpiderState | None = None
    samples = 0
    records: list[TraceRecord] = []
    inner_total = 0
    output = None
    for k in range(1, cfg.K + 1):
        G, state, used = _estimator_step(oracle, x, cfg, state, k)
        samples += used
        x_next, inner = advance(x, G)
        inner_total += inner
        if not is_feasible(x_next, cfg.region, FEASIBILITY_TOL):
            raise InfeasibleInputError(f"iterate at step {k} left the feasible region")
        if k == Y:
            output = x_next.copy()
        if k % cfg.record_every == 0 or k == cfg.K or k == Y:
            objective, residual = _record_metrics(oracle, x_next, cfg.region)
            records.append(
                TraceRecord(
                    k,
                    objective,
                    residual,
                    float(np.abs(x_next - x).sum()),
                    time.perf_counter() - t0,
                    samples,
                    inner_total,
                )
            )
        x = x_next
    assert output is not None
    return RunTrace(tuple(records), Y, output, x, samples, cfg)


def disfom_run(oracle: StochasticOracle, x1, cfg: OptimizerConfig, seed: int | None = None) -> RunTrace:
    """Run the proximal stochastic first-order loop and return its trace.

    The (penalty, region) pair must have a registered subproblem solver:
    squared-l1 with unconstrained/box/l1-ball+box regions, the l1-ball
    indicator with unconstrained/box, or the Euclidean term with
    unconstrained/box (plain projected SGD / SPIDER baselines).

    ``seed`` overrides ``cfg.seed`` when given; all randomness is derived
    from per-step substreams of the effective seed (see :func:`step_stream`).
    """
    if seed is not None:
        cfg = OptimizerConfig(
            cfg.eta, cfg.K, cfg.prox, cfg.estimator, cfg.region, seed,
            cfg.record_every, cfg.output_rule,
        )
    pair = (type(cfg.prox), type(cfg.region))
    if pair not in _REGISTERED:
        raise UnsupportedRegionError(
            f"no registered solver for {pair[0].__name__} x {pair[1].__name__}"
        )

    def advance(x: np.ndarray, G: np.ndarray):
        return _proximal_step(x, x - cfg.eta * G, cfg.prox, cfg.region), 0

    return _run_loop(oracle, x1, cfg, advance)


# ---------------------------------------------------------------------------
# Stochastic mirror descent with omega(x) = (C/2) ||x||_p^2
# ---------------------------------------------------------------------------


def _grad_omega(z: np.ndarray, p: float, C: float) -> np.ndarray:
    az = np.abs(z)
    norm_p = (az**p).sum() ** (1.0 / p)
    if norm_p == 0.0:
        return np.zeros_like(z)
    return C * norm_p ** (2.0 - p) * np.sign(z) * az ** (p - 1.0)


def _bregman_subproblem(
    x: np.ndarray,
    G: np.ndarray,
    alpha: float,
    smd: SmdConfig,
    region: FeasibleRegion,
) -> tuple[np.ndarray, int]:
    """argmin_{z in X} <G, z> + (1/alpha) D_omega(z, x), solved exactly.

    Stationarity reads grad omega(z) = y + bound multipliers with
    y = grad omega(x) - alpha G.  Writing s = ||z||_p, the coordinates of a
    KKT point are clip(sgn(y_i) (|y_i| / (C s^{2-p}))^{1/(p-1)}, l_i, u_i),
    whose p-norm is strictly decreasing in s; the consistency equation
    s = ||z(s)||_p is therefore a monotone scalar root problem, bracketed by
    the unconstrained level ||y||_q / C (clipping toward the box only shrinks
    magnitudes when the level is at or below it) and solved by bisection.
    Unconstrained regions take the closed form at that level directly.
    """
    p, C = smd.p_exponent, smd.strong_convexity_scale
    y = _grad_omega(x, p, C) - alpha * G
    ay = np.abs(y)
    sy = np.sign(y)
    inv = 1.0 / (p - 1.0)
    q = p / (p - 1.0)
    y_norm_q = float((ay**q).sum() ** (1.0 / q))
    if y_norm_q == 0.0:
        return euclidean_project(np.zeros_like(x), region), 0
    s_unc = y_norm_q / C
    if isinstance(region, Unconstrained):
        scale = C * s_unc ** (2.0 - p)
        return sy * (ay / scale) ** inv, 0
    lower, upper = region.lower, region.upper
    cap = np.maximum(np.abs(lower), np.abs(upper)) + 1.0

    def z_of(s: float) -> np.ndarray:
        scale = C * s ** (2.0 - p)
        with np.errstate(over="ignore"):
            mag = np.minimum((ay / scale) ** inv, cap)
        return np.clip(sy * mag, lower, upper)

    def level_gap(s: float) -> float:
        return s - float((np.abs(z_of(s)) ** p).sum() ** (1.0 / p))

    # ||z(s)||_p <= ||zhat(s)||_p = s at s = s_unc for boxes around 0; for a
    # box that pushes magnitudes outward, grow the bracket geometrically.
    s_hi = s_unc
    grow = 0
    while level_gap(s_hi) < 0.0:
        s_hi *= 2.0
        grow += 1
        if grow > smd.max_inner:
            raise IterationLimitError("mirror-step level bracket failed to grow")
    s_lo = s_hi
    shrink = 0
    while level_gap(s_lo) > 0.0:
        s_lo *= 0.5
        shrink += 1
        if shrink > 4000:
            # the fixed point collapses to the degenerate corner z(0+)
            return z_of(s_lo), grow + shrink
    res = bisect_monotone(
        level_gap, s_lo, s_hi, smd.subproblem_tol * max(1.0, s_unc),
        max_iter=smd.max_inner,
    )
    return z_of(res.root), grow + shrink + res.iterations


def smd_run(
    oracle: StochasticOracle,
    x1,
    cfg: OptimizerConfig,
    smd: SmdConfig,
    seed: int | None = None,
) -> RunTrace:
    """Stochastic mirror descent with the l_p distance generating function.

    Each step solves argmin_{z in X} <G^k, z> + (1/alpha) D_omega(z, x^k)
    to ``smd.subproblem_tol``; the per-record trace carries cumulative inner
    iteration counts.  Regions are limited to Unconstrained and Box.
    """
    if seed is not None:
        cfg = OptimizerConfig(
            cfg.eta, cfg.K, cfg.prox, cfg.estimator, cfg.region, seed,
            cfg.record_every, cfg.output_rule,
        )
    if not isinstance(cfg.region, (Unconstrained, Box)):
        raise UnsupportedRegionError("smd_run supports Unconstrained and Box regions")

    def advance(x: np.ndarray, G: np.ndarray):
        return _bregman_subproblem(x, G, smd.step, smd, cfg.region)

    return _run_loop(oracle, x1, cfg, advance)


# ---------------------------------------------------------------------------
# Deterministic reference solver
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PgdResult:
    """Final iterate of the reference solver plus its stopping evidence."""

    x: np.ndarray
    final_step_l1: float
    iterations: int


def pgd_backtracking(
    value_fn: Callable[[np.ndarray], float],
    grad_fn: Callable[[np.ndarray], np.ndarray],
    region: FeasibleRegion,
    x0,
    c1: float = 0.25,
    shrink: float = 0.5,
    step_tol: float = 1e-10,
    max_iter: int = 10**6,
    return_info: bool = False,
) -> np.ndarray | PgdResult:
    """Projected gradient with Armijo backtracking; the f* reference solver.

    Every iteration restarts the trial step at 1 and halves it until
    f(P_X(x - a g)) <= f(x) + c1 * g^T (P_X(x - a g) - x); the loop stops the
    first time ||x_{k+1} - x_k||_1 <= step_tol and returns the newer iterate
    (with the certifying step norm when ``return_info`` is set).
    Deterministic: no randomness anywhere.
    """
    if not isinstance(region, (Unconstrained, Box)):
        raise UnsupportedRegionError("pgd_backtracking supports Unconstrained and Box")
    x = euclidean_project(as_vector(x0, "x0"), region)
    for it in range(1, max_iter + 1):
        g = grad_fn(x)
        fx = value_fn(x)
        alpha = 1.0
        for _ in range(200):
            cand = euclidean_project(x - alpha * g, region)
            if value_fn(cand) <= fx + c1 * float(g @ (cand - x)):
                break
            alpha *= shrink
        else:
            raise IterationLimitError("Armijo backtracking failed to make progress")
        step_l1 = float(np.abs(cand - x).sum())
        if step_l1 <= step_tol:
            return PgdResult(cand, step_l1, it) if return_info else cand
        x = cand
    raise IterationLimitError(f"no convergence within {max_iter} iterations")


# ---------------------------------------------------------------------------
# Hyper-parameter recipes
# ---------------------------------------------------------------------------

HyperMode = Literal["case1_minibatch", "case1_vr", "case2_minibatch", "case2_vr"]


@dataclass(frozen=True)
class HyperparameterPlan:
    """Step size, iteration budget, and batch schedule for a target accuracy.

    For the variance-reduced modes the integer schedule satisfies
    m == q0 * omega_sq and m1 == m * q0 exactly, with omega_sq the integer
    ceiling of (e^2 log d)^2; ``rho_hat_min`` is the penalty lower bound of
    the corresponding recipe, and ``psi`` the trust-region radius eps / L.
    """

    mode: HyperMode
    eta: float
    K: int
    m: int
    m1: int | None = None
    q0: int | None = None
    rho_hat_min: float | None = None
    psi: float | None = None
    omega: float | None = None
    omega_sq: int | None = None
    theory_c: float = 1.0


def suggest_hyperparameters(
    epsilon: float,
    d: int,
    L: float,
    delta_f: float,
    sigma_inf: float,
    mode: HyperMode,
    theory_c: float = 1.0,
) -> HyperparameterPlan:
    """Hyper-parameters attaining the target accuracy in each analysis regime.

    Common to all modes: eta = 1/L and K = ceil(delta_f * L / eps^2).
    Minibatch modes set m = ceil(c * log(d) * sigma_inf^2 / eps^2) with the
    unknown theory constant c configurable (default 1).  Variance-reduced
    modes set m1 from the omega-weighted noise level and pick the integer
    schedule (q0, m, m1) closing the relations m = q0 * omega_sq, m1 = m * q0.
    Case-1 modes report the penalty lower bound (2 for minibatch, 6 for vr);
    case-2 modes report psi = eps / L.
    """
    if min(epsilon, L, delta_f, sigma_inf) <= 0 or d < 1:
        raise ValueError("all inputs must be positive")
    eta = 1.0 / L
    K = ceil(delta_f * L / epsilon**2)
    noise = theory_c * log(max(d, 1)) * sigma_inf**2
    if mode in ("case1_minibatch", "case2_minibatch"):
        m = max(1, ceil(noise / epsilon**2))
        if mode == "case1_minibatch":
            return HyperparameterPlan(mode, eta, K, m, rho_hat_min=2.0, theory_c=theory_c)
        return HyperparameterPlan(mode, eta, K, m, psi=epsilon / L, theory_c=theory_c)
    if mode in ("case1_vr", "case2_vr"):
        omega = exp(2) * log(max(d, 1))
        omega_sq = max(1, ceil(omega**2))
        m1_target = max(1, ceil(omega * noise / epsilon**2))
        q0 = max(1, round((m1_target / omega_sq) ** 0.5))
        m = q0 * omega_sq
        m1 = m * q0
        if mode == "case1_vr":
            return HyperparameterPlan(
                mode, eta, K, m, m1, q0, rho_hat_min=6.0,
                omega=omega, omega_sq=omega_sq, theory_c=theory_c,
            )
        return HyperparameterPlan(
            mode, eta, K, m, m1, q0, psi=epsilon / L,
            omega=omega, omega_sq=omega_sq, theory_c=theory_c,
        )
    raise ValueError(f"unknown mode {mode!r}")


def case1_subgradient(step: np.ndarray, v_shift: np.ndarray, tau: float) -> np.ndarray:
    """Subgradient element of (rho_hat/2)||.||_1^2 certified by the prox KKT data.

    For nonzero step coordinates the element is tau * sgn(step); where the
    step is zero the stationarity residual pins it to clip(v_shift, -tau, tau).
    Used to check the step optimality certificate of the main loop.
    """
    xi = np.where(step != 0.0, tau * np.sign(step), np.clip(v_shift, -tau, tau))
    return xi
