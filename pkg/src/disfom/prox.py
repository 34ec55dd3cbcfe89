"""Exact solvers for the per-step proximal projection subproblems.

Two families are covered.  With the squared-l1 penalty term the subproblem is

    min_z  0.5 ||z - v||^2 + (rho_hat / 2) ||z||_1^2     s.t. z in C,

solved in closed form when C = R^d (a sort plus prefix sums), by bisection on
the shrinkage level tau = rho_hat * ||z||_1 when C is a box, and by a nested
bisection on (mu, tau) when C is an l1 ball intersected with a box.  With the
l1-ball indicator term the subproblem is the projection onto an l1 ball
(closed form via a sort) optionally intersected with a box (bisection on the
ball multiplier).  A polyhedral C is reduced to convex-QP data and handed off.

All solvers return a :class:`ProxSolution` whose multipliers let callers
verify the KKT system of the subproblem they solved.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .core import Box, FeasibleRegion, Unconstrained, as_vector
from .errors import (
    BracketError,
    DimensionMismatchError,
    InfeasibleInputError,
    IterationLimitError,
    UnsupportedRegionError,
)

__all__ = [
    "BisectionResult",
    "ProxSolution",
    "QPReformulation",
    "bisect_monotone",
    "prox_l1sq_unconstrained",
    "prox_l1sq_box",
    "prox_l1sq_l1box",
    "project_l1_ball",
    "prox_case2_shifted",
    "reformulate_polyhedron_qp",
]

# Bracket-width defaults lifted from the experiment protocol: 1e-10 for the
# single box search, 1e-6 for the nested l1+box searches with 1e-12 on the
# ball-feasibility residual.
BOX_TOL = 1e-10
L1BOX_TOL = 1e-6
BALL_FEAS_TOL = 1e-12


@dataclass(frozen=True)
class BisectionResult:
    """Root bracketed to width <= tol, with the residual at the returned point."""

    root: float
    residual: float
    iterations: int

    def __float__(self) -> float:
        return self.root


@dataclass(frozen=True)
class ProxSolution:
    """Minimizer plus the multipliers characterizing it.

    ``tau`` is the shrinkage level rho_hat * ||z||_1 for the squared-l1 term
    and the soft-threshold multiplier for ball projections; ``mu`` is the
    multiplier of an extra l1-ball feasibility constraint (0 when inactive).
    """

    z: np.ndarray
    tau: float
    mu: float = 0.0
    iterations: int = 0


@dataclass(frozen=True)
class QPReformulation:
    """Data of the convex QP equivalent to the polyhedral subproblem."""

    Q: np.ndarray
    p: np.ndarray
    A_tilde: np.ndarray
    b: np.ndarray


def bisect_monotone(
    residual: Callable[[float], float],
    lo: float,
    hi: float,
    tol: float,
    max_iter: int = 200,
) -> BisectionResult:
    """Find the root of a nondecreasing scalar function by bisection.

    Requires residual(lo) <= 0 <= residual(hi).  The bracket is halved until
    its width drops below ``tol``; the midpoint of the final bracket is
    returned together with the residual evaluated there.  Deterministic for
    fixed inputs.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if lo > hi:
        raise BracketError(f"empty bracket: lo={lo} > hi={hi}")
    r_lo = residual(lo)
    r_hi = residual(hi)
    if r_lo > 0:
        raise BracketError(f"residual(lo)={r_lo} > 0")
    if r_hi < 0:
        raise BracketError(f"residual(hi)={r_hi} < 0")
    iterations = 0
    while hi - lo > tol:
        if iterations >= max_iter:
            raise IterationLimitError(
                f"bisection bracket width {hi - lo:g} > tol {tol:g} "
                f"after {max_iter} iterations"
            )
        iterations += 1
        mid = 0.5 * (lo + hi)
        r_mid = residual(mid)
        if r_mid < 0:
            lo = mid
        else:
            hi = mid
    root = 0.5 * (lo + hi)
    return BisectionResult(root, float(residual(root)), iterations)


# ---------------------------------------------------------------------------
# Case 1: phi = (rho_hat / 2) ||.||_1^2
# ---------------------------------------------------------------------------


def prox_l1sq_unconstrained(v, rho_hat: float) -> ProxSolution:
    """Closed-form minimizer of 0.5 ||z - v||^2 + (rho_hat/2) ||z||_1^2.

    Sort magnitudes ascending, form the threshold sequence
    s_k = sum of the k-1 smallest |v_i| + ((d-k+1) rho_hat + 1)/rhohat * |v_{(k)}|,
    locate the unique k with s_k <= ||v||_1 < s_{k+1} by binary search, zero
    the k smallest coordinates and shrink the rest uniformly.  O(d log d).
    Ties in |v_i| are broken by original index; the minimizer is unique so tie
    order only affects the internal permutation.
    """
    v = as_vector(v, "v")
    rho_hat = float(rho_hat)
    if rho_hat <= 0:
        raise ValueError("rho_hat must be positive")
    d = v.size
    if not np.any(v):
        return ProxSolution(np.zeros(d), 0.0)
    absv = np.abs(v)
    order = np.argsort(absv, kind="stable")
    a = absv[order]
    total = a.sum()
    prefix = np.concatenate([[0.0], np.cumsum(a)[:-1]])
    k = np.arange(1, d + 1)
    s = prefix + ((d - k + 1) * rho_hat + 1.0) / rho_hat * a
    s_full = np.concatenate([[0.0], s])  # s_0 = 0
    k_bar = int(np.searchsorted(s_full, total, side="right")) - 1
    k_bar = min(k_bar, d - 1)  # s_d = ||v||_1 + |v|_max / rho_hat > ||v||_1
    tail = a[k_bar:].sum()
    z_norm1 = tail / (rho_hat * (d - k_bar) + 1.0)
    tau = rho_hat * z_norm1
    z = np.zeros(d)
    keep = order[k_bar:]
    z[keep] = v[keep] - np.sign(v[keep]) * tau
    return ProxSolution(z, float(tau))


def _soft_clip(v, tau, lower, upper):
    """clip_{[l,u]}(sgn(v) (|v| - tau)_+), vectorized."""
    return np.clip(np.sign(v) * np.maximum(np.abs(v) - tau, 0.0), lower, upper)


def _abs_clip_bounds(v, lower, upper):
    """Constant bounds (P, Q) with |soft-clip(v, tau)| = clip(|v| - tau, P, Q).

    Case analysis on sgn(v_i) and the position of the box cell relative to 0;
    degenerate cells where the clip pins z_i encode as P = Q.
    """
    P = np.empty_like(lower)
    Q = np.empty_like(upper)
    pos = v > 0
    neg = v < 0
    zero = ~pos & ~neg
    # v_i > 0: z lives in [max(l,0), u] unless u < 0 pins it at u
    P[pos] = np.maximum(lower[pos], 0.0)
    Q[pos] = upper[pos]
    pinned = pos & (upper < 0)
    P[pinned] = -upper[pinned]
    Q[pinned] = -upper[pinned]
    # v_i < 0: mirrored
    P[neg] = np.maximum(-upper[neg], 0.0)
    Q[neg] = -lower[neg]
    pinned = neg & (lower > 0)
    P[pinned] = lower[pinned]
    Q[pinned] = lower[pinned]
    # v_i = 0: z is clip(0, l, u), constant in tau
    cz = np.abs(np.clip(0.0, lower[zero], upper[zero]))
    P[zero] = cz
    Q[zero] = cz
    return P, Q


def _check_box(v, lower, upper):
    lower = as_vector(lower, "lower")
    upper = as_vector(upper, "upper")
    if not (v.size == lower.size == upper.size):
        raise DimensionMismatchError("v and box bounds have different lengths")
    if not np.all(lower < upper):
        raise InfeasibleInputError("box requires lower_i < upper_i")
    return lower, upper


def prox_l1sq_box(v, rho_hat: float, lower, upper, tol: float = BOX_TOL) -> ProxSolution:
    """Box-constrained squared-l1 prox via bisection on the shrinkage level.

    The KKT system reduces to the scalar root problem
    R(tau) = tau - rho_hat * sum_i |clip(sgn(v_i)(|v_i| - tau)_+)| = 0 with R
    nondecreasing, R(0) <= 0 and R(rho_hat * sum max(|v_i|, |l_i|, |u_i|)) >= 0,
    after which z is recovered coordinatewise from the clipped soft threshold.
    """
    v = as_vector(v, "v")
    rho_hat = float(rho_hat)
    if rho_hat <= 0:
        raise ValueError("rho_hat must be positive")
    lower, upper = _check_box(v, lower, upper)

    # |z_i(tau)| collapses to clip(|v_i| - tau, P_i, Q_i) with constant bounds,
    # so each residual evaluation is a single fused clip-and-sum.
    a = np.abs(v)
    P, Q = _abs_clip_bounds(v, lower, upper)
    buf = np.empty_like(a)

    def R(tau: float) -> float:
        np.subtract(a, tau, out=buf)
        np.clip(buf, P, Q, out=buf)
        return tau - rho_hat * buf.sum()

    hi = rho_hat * np.maximum(a, np.maximum(np.abs(lower), np.abs(upper))).sum()
    res = bisect_monotone(R, 0.0, max(hi, tol), tol)
    z = _soft_clip(v, res.root, lower, upper)
    return ProxSolution(z, res.root, 0.0, res.iterations)


def _pen_min_1d(v, w, lower, upper, tau: float, mu: float) -> np.ndarray:
    """Coordinatewise argmin of 0.5 (x - v)^2 + tau |x| + mu |x - w| on [l, u].

    The 1-D objective is convex piecewise quadratic with breakpoints at 0 and
    w; its unconstrained minimizer is one of the four smooth-region
    stationary points or a breakpoint, and clipping preserves optimality on
    an interval.  Evaluating the objective at the six clipped candidates and
    taking the best is therefore exact, and sidesteps the overlapping branch
    conditions of the piecewise closed form.  Buffers are reused: this is
    the hot path of the nested bisection.
    """
    d = v.size
    cands = np.empty((6, d))
    cands[0] = v
    cands[0] += tau + mu
    cands[1] = v
    cands[1] += mu - tau
    cands[2] = v
    cands[2] += tau - mu
    cands[3] = v
    cands[3] -= tau + mu
    cands[4] = 0.0
    cands[5] = w
    np.clip(cands, lower, upper, out=cands)
    obj = cands - v
    np.multiply(obj, obj, out=obj)
    obj *= 0.5
    work = np.abs(cands)
    work *= tau
    obj += work
    np.subtract(cands, w, out=work)
    np.abs(work, out=work)
    work *= mu
    obj += work
    pick = np.argmin(obj, axis=0)
    return cands[pick, np.arange(d)]


def prox_l1sq_l1box(
    v,
    rho_hat: float,
    w,
    alpha: float,
    lower,
    upper,
    tol: float = L1BOX_TOL,
    ball_tol: float = BALL_FEAS_TOL,
) -> ProxSolution:
    """Squared-l1 prox over {||x - w||_1 <= alpha} intersected with a box.

    Phase 1 assumes the ball multiplier mu = 0 and solves the box problem; if
    the result is ball-feasible it is returned as is.  Otherwise an outer
    bisection runs on mu over [0, mu_hat], where
    mu_hat = ||clip(w) - v||_inf + rho_hat ||clip(w)||_1 certifies a
    ball-feasible KKT point (doubled here as a rounding guard), and every
    outer evaluation solves the inner root problem
    R2(tau; mu) = tau - rho_hat sum_i |xbar_i(tau, mu)| = 0 by bisection.
    The outer residual ||xbar(mu, tau*(mu)) - w||_1 - alpha is nonincreasing
    in mu; the ball-feasible end of the final bracket is returned.
    """
    v = as_vector(v, "v")
    w = as_vector(w, "w")
    rho_hat = float(rho_hat)
    alpha = float(alpha)
    if rho_hat <= 0 or alpha <= 0:
        raise ValueError("rho_hat and alpha must be positive")
    lower, upper = _check_box(v, lower, upper)
    if w.size != v.size:
        raise DimensionMismatchError("w and v have different lengths")
    w_clip = np.clip(w, lower, upper)
    if np.abs(w_clip - w).sum() > alpha + ball_tol:
        raise InfeasibleInputError("l1 ball and box do not intersect")

    phase1 = prox_l1sq_box(v, rho_hat, lower, upper, tol)
    iterations = phase1.iterations
    if np.abs(phase1.z - w).sum() <= alpha + ball_tol:
        return ProxSolution(phase1.z, phase1.tau, 0.0, iterations)

    tau_hi = rho_hat * np.maximum(np.abs(lower), np.abs(upper)).sum()

    def solve_tau(mu: float) -> BisectionResult:
        def R2(tau: float) -> float:
            return tau - rho_hat * np.abs(_pen_min_1d(v, w, lower, upper, tau, mu)).sum()

        return bisect_monotone(R2, 0.0, max(tau_hi, tol), tol)

    def ball_residual(mu: float) -> tuple[float, int]:
        inner = solve_tau(mu)
        x = _pen_min_1d(v, w, lower, upper, inner.root, mu)
        return float(np.abs(x - w).sum() - alpha), inner.iterations

    mu_hat = 2.0 * (np.abs(w_clip - v).max() + rho_hat * np.abs(w_clip).sum())
    r_hat, it = ball_residual(mu_hat)
    iterations += it
    if r_hat > ball_tol:
        raise BracketError(
            f"ball residual {r_hat:g} > 0 at the certified upper bracket mu={mu_hat:g}"
        )
    mu_lo, mu_hi = 0.0, mu_hat
    guard = 0
    while mu_hi - mu_lo > tol:
        guard += 1
        if guard > 200:
            raise IterationLimitError("outer bisection on mu failed to converge")
        mid = 0.5 * (mu_lo + mu_hi)
        r_mid, it = ball_residual(mid)
        iterations += it
        if r_mid > 0:
            mu_lo = mid
        else:
            mu_hi = mid
    # Return the ball-feasible end of the bracket.
    inner = solve_tau(mu_hi)
    iterations += inner.iterations
    z = _pen_min_1d(v, w, lower, upper, inner.root, mu_hi)
    return ProxSolution(z, inner.root, mu_hi, iterations)


# ---------------------------------------------------------------------------
# Case 2: phi = indicator of the l1 ball
# ---------------------------------------------------------------------------


def project_l1_ball(v, psi: float) -> ProxSolution:
    """Euclidean projection onto {z : ||z||_1 <= psi} in O(d log d).

    If ||v||_1 <= psi the projection is v itself.  Otherwise sort magnitudes
    descending, form s_m = sum of the m largest - m * (next magnitude), find
    the first m with psi <= s_m, and soft-threshold the top m coordinates by
    lambda = (sum of the m largest - psi) / m.  ``tau`` carries lambda; the
    active case lands on the sphere ||z||_1 = psi exactly up to rounding.
    """
    v = as_vector(v, "v")
    psi = float(psi)
    if psi <= 0:
        raise ValueError("psi must be positive")
    d = v.size
    absv = np.abs(v)
    total = absv.sum()
    if total <= psi:
        return ProxSolution(v.copy(), 0.0)
    order = np.argsort(-absv, kind="stable")
    a = absv[order]
    csum = np.cumsum(a)
    m = np.arange(1, d + 1)
    next_mag = np.concatenate([a[1:], [0.0]])
    s = csum - m * next_mag  # s_d = ||v||_1
    s_full = np.concatenate([[0.0], s])
    m_bar = int(np.searchsorted(s_full, psi, side="left"))
    m_bar = max(1, min(m_bar, d))
    lam = (csum[m_bar - 1] - psi) / m_bar
    z = np.zeros(d)
    keep = order[:m_bar]
    z[keep] = v[keep] - np.sign(v[keep]) * lam
    return ProxSolution(z, float(lam))


def prox_case2_shifted(
    v,
    center,
    psi: float,
    region: FeasibleRegion,
    tol: float = BALL_FEAS_TOL,
) -> ProxSolution:
    """min 0.5 ||z - v||^2 s.t. ||z - center||_1 <= psi (and z in a box).

    Everything is translated so the ball sits at the origin.  Unconstrained
    regions reduce to :func:`project_l1_ball`.  For a box containing the
    center, the translated clip interval of every coordinate contains 0, so
    y_i(mu) = clip(sgn(v_i)(|v_i| - mu)_+) has nonincreasing magnitude in mu
    and a bisection on mu restores ||y(mu)||_1 = psi whenever the mu = 0
    solution overflows the ball.
    """
    v = as_vector(v, "v")
    center = as_vector(center, "center")
    psi = float(psi)
    if psi <= 0:
        raise ValueError("psi must be positive")
    if v.size != center.size:
        raise DimensionMismatchError("v and center have different lengths")
    if isinstance(region, Unconstrained):
        inner = project_l1_ball(v - center, psi)
        return ProxSolution(center + inner.z, inner.tau, 0.0, inner.iterations)
    if isinstance(region, Box):
        if not np.all((center >= region.lower) & (center <= region.upper)):
            raise InfeasibleInputError("center must lie in the box")
        v_shift = v - center
        lo = region.lower - center
        hi = region.upper - center

        def y(mu: float) -> np.ndarray:
            return _soft_clip(v_shift, mu, lo, hi)

        y0 = y(0.0)
        if np.abs(y0).sum() <= psi:
            return ProxSolution(center + y0, 0.0)

        def ball_gap(mu: float) -> float:
            return psi - np.abs(y(mu)).sum()  # nondecreasing in mu

        res = bisect_monotone(ball_gap, 0.0, float(np.abs(v_shift).max()), tol)
        return ProxSolution(center + y(res.root), res.root, 0.0, res.iterations)
    raise UnsupportedRegionError("region must be Unconstrained or Box")


# ---------------------------------------------------------------------------
# Polyhedral region: emit the equivalent convex QP
# ---------------------------------------------------------------------------


def reformulate_polyhedron_qp(v, rho_hat: float, A, b) -> QPReformulation:
    """Rewrite the polyhedral subproblem as a convex QP via z = (x+; x-).

    Q = [[I, -I], [-I, I]] + rho_hat * ones(2d, 2d), p = (-v; v) and
    A_tilde = (A, -A); the QP itself is not solved here.
    """
    v = as_vector(v, "v")
    rho_hat = float(rho_hat)
    if rho_hat <= 0:
        raise ValueError("rho_hat must be positive")
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[1] != v.size:
        raise DimensionMismatchError("A must have d columns")
    b = as_vector(b, "b")
    if b.size != A.shape[0]:
        raise DimensionMismatchError("A rows and b length differ")
    d = v.size
    eye = np.eye(d)
    Q = np.block([[eye, -eye], [-eye, eye]]) + rho_hat * np.ones((2 * d, 2 * d))
    p = np.concatenate([-v, v])
    A_tilde = np.hstack([A, -A])
    return QPReformulation(Q, p, A_tilde, b.copy())
