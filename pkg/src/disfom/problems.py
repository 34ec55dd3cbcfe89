"""Synthetic nonconvex stochastic quadratic program with known structure.

The objective is f(x) = 0.5 E[(a^T x - b)^2] + lambda * sum_i x_i^2/(1+x_i^2)
over a box [-R, R]^d, where (a, b) follow b = a^T x_true + w, a = Sigma^{1/2} s
with s and w i.i.d. truncated standard normals on [-u, u].  Sigma is the
identity outside a dense top-left sub-block Q D Q^T whose eigenvalues lie in
(1, 2), so the gradient Lipschitz constant is independent of the dimension.
Everything needed for metrics is available in closed form:

    f(x)      = (sigma^2/2) (x - x_true)^T Sigma (x - x_true)
                + lambda * sum_i x_i^2/(1+x_i^2) + sigma^2/2
    grad f(x) = sigma^2 Sigma (x - x_true) + lambda * 2 x_i / (1+x_i^2)^2

with sigma^2 the truncated-normal variance.  The sub-block structure keeps
sampling at O(d) per draw plus one small matrix product per batch.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import erf, exp, pi, sqrt

import numpy as np

from .core import Box, as_vector
from .errors import DimensionMismatchError
from .optimizers import pgd_backtracking
from .sampling import StochasticOracle

__all__ = [
    "SyntheticQpSpec",
    "SyntheticQpInstance",
    "SyntheticOracle",
    "sigma_sq_trunc_normal",
    "power_iteration",
    "generate_instance",
    "exact_value",
    "exact_gradient",
    "sample_gradient",
    "reference_optimum",
]


def _std_normal_cdf(t: float) -> float:
    return 0.5 * (1.0 + erf(t / sqrt(2.0)))


def sigma_sq_trunc_normal(u: float) -> float:
    """Variance of a standard normal truncated to [-u, u].

    sigma^2 = 1 - (2u/sqrt(2 pi)) exp(-u^2/2) / (Phi(u) - Phi(-u)); the
    normal CDF comes from erf, accurate to machine precision.
    """
    u = float(u)
    if u <= 0:
        raise ValueError("u must be positive")
    mass = _std_normal_cdf(u) - _std_normal_cdf(-u)
    return 1.0 - (2.0 * u / sqrt(2.0 * pi)) * exp(-0.5 * u * u) / mass


def power_iteration(M: np.ndarray, tol: float = 1e-10, max_iter: int = 100_000) -> float:
    """Largest eigenvalue of a symmetric PSD matrix by power iteration.

    Stops when the Rayleigh quotient is stationary to relative ``tol``.
    """
    M = np.asarray(M, dtype=float)
    n = M.shape[0]
    x = np.ones(n) / sqrt(n)
    lam = float(x @ (M @ x))
    for _ in range(max_iter):
        y = M @ x
        norm = np.linalg.norm(y)
        if norm == 0.0:
            return 0.0
        x = y / norm
        lam_new = float(x @ (M @ x))
        if abs(lam_new - lam) <= tol * max(abs(lam_new), 1.0):
            return lam_new
        lam = lam_new
    return lam


@dataclass(frozen=True)
class SyntheticQpSpec:
    d: int
    seed: int
    lambda_reg: float = 2.5
    box_half_width: float = 3.0
    trunc: float = 3.0
    sub_block: int = 100

    def __post_init__(self):
        if int(self.d) < self.sub_block:
            raise ValueError(f"d must be >= sub_block ({self.sub_block})")
        if min(self.lambda_reg, self.box_half_width, self.trunc) <= 0:
            raise ValueError("lambda_reg, box_half_width and trunc must be positive")
        object.__setattr__(self, "d", int(self.d))
        object.__setattr__(self, "seed", int(self.seed))
        object.__setattr__(self, "sub_block", int(self.sub_block))

    def to_dict(self) -> dict:
        return {
            "d": self.d,
            "seed": self.seed,
            "lambda_reg": self.lambda_reg,
            "box_half_width": self.box_half_width,
            "trunc": self.trunc,
            "sub_block": self.sub_block,
        }


@dataclass(frozen=True)
class SyntheticQpInstance:
    spec: SyntheticQpSpec
    sub_cov: np.ndarray  # the dense sub-block of the scaled covariance
    sqrt_block: np.ndarray  # symmetric square root of sub_cov
    x_true: np.ndarray
    sigma_sq: float
    lipschitz: float
    region: Box

    @property
    def d(self) -> int:
        return self.spec.d

    @property
    def lambda_reg(self) -> float:
        return self.spec.lambda_reg

    def cov_matvec(self, y: np.ndarray) -> np.ndarray:
        """Sigma @ y: identity pass-through outside the sub-block."""
        k = self.spec.sub_block
        out = y.copy()
        out[:k] = self.sub_cov @ y[:k]
        return out

    def sigma_factor_dense(self) -> np.ndarray:
        """Materialize Sigma^{1/2} as a dense d x d matrix (small d only)."""
        k = self.spec.sub_block
        out = np.eye(self.d)
        out[:k, :k] = self.sqrt_block
        return out


def generate_instance(spec: SyntheticQpSpec, max_retries: int = 5) -> SyntheticQpInstance:
    """Draw the covariance sub-block and derived constants; seeded and bit-stable.

    The sub-block is Q D Q^T with Q an orthonormal basis (QR) of a uniform
    (0,1) random matrix and D diagonal uniform (1,2); a rank-deficient draw is
    rejected and redrawn, with a bounded retry count.
    """
    rng = np.random.default_rng(np.random.SeedSequence(entropy=spec.seed))
    k = spec.sub_block
    for _ in range(max_retries):
        raw = rng.uniform(0.0, 1.0, (k, k))
        q, r = np.linalg.qr(raw)
        if np.abs(np.diag(r)).min() > 1e-10:
            break
    else:
        raise RuntimeError("orthonormalization failed repeatedly")
    diag = rng.uniform(1.0, 2.0, k)
    sub_cov = (q * diag) @ q.T
    sub_cov = 0.5 * (sub_cov + sub_cov.T)
    sqrt_block = (q * np.sqrt(diag)) @ q.T
    sqrt_block = 0.5 * (sqrt_block + sqrt_block.T)
    x_true = np.zeros(spec.d)
    x_true[:k] = 1.0
    sigma_sq = sigma_sq_trunc_normal(spec.trunc)
    lam_max = sigma_sq * max(power_iteration(sub_cov), 1.0)
    lipschitz = lam_max + 2.0 * spec.lambda_reg
    R = spec.box_half_width
    region = Box(np.full(spec.d, -R), np.full(spec.d, R))
    return SyntheticQpInstance(
        spec, sub_cov, sqrt_block, x_true, sigma_sq, lipschitz, region
    )


def exact_value(inst: SyntheticQpInstance, x) -> float:
    x = as_vector(x, "x")
    if x.size != inst.d:
        raise DimensionMismatchError("x has the wrong length")
    diff = x - inst.x_true
    quad = 0.5 * inst.sigma_sq * float(diff @ inst.cov_matvec(diff))
    reg = inst.lambda_reg * float((x**2 / (1.0 + x**2)).sum())
    return quad + reg + 0.5 * inst.sigma_sq


def exact_gradient(inst: SyntheticQpInstance, x) -> np.ndarray:
    x = as_vector(x, "x")
    if x.size != inst.d:
        raise DimensionMismatchError("x has the wrong length")
    diff = x - inst.x_true
    return inst.sigma_sq * inst.cov_matvec(diff) + inst.lambda_reg * (
        2.0 * x / (1.0 + x**2) ** 2
    )


def _truncated_normal(rng: np.random.Generator, shape, u: float) -> np.ndarray:
    """Rejection sampling from the standard normal restricted to [-u, u]."""
    x = rng.standard_normal(shape)
    while True:
        bad = np.abs(x) > u
        n_bad = int(bad.sum())
        if n_bad == 0:
            return x
        x[bad] = rng.standard_normal(n_bad)


def _regularizer_gradient(inst: SyntheticQpInstance, x: np.ndarray) -> np.ndarray:
    return inst.lambda_reg * 2.0 * x / (1.0 + x**2) ** 2


def sample_gradient(inst: SyntheticQpInstance, x, rng: np.random.Generator) -> np.ndarray:
    """One draw of the sampled gradient a (a^T (x - x_true) - w) + reg'(x)."""
    x = as_vector(x, "x")
    a, w = _draw_scenarios(inst, rng, 1)
    diff = x - inst.x_true
    return a[0] * (float(a[0] @ diff) - w[0]) + _regularizer_gradient(inst, x)


def _draw_scenarios(inst: SyntheticQpInstance, rng: np.random.Generator, m: int):
    """m rows of a = Sigma^{1/2} s plus the noise draws w."""
    u = inst.spec.trunc
    k = inst.spec.sub_block
    s = _truncated_normal(rng, (m, inst.d), u)
    w = _truncated_normal(rng, m, u)
    a = s
    a[:, :k] = s[:, :k] @ inst.sqrt_block
    return a, w


class SyntheticOracle(StochasticOracle):
    """Stochastic first-order oracle over a generated instance."""

    def __init__(self, inst: SyntheticQpInstance):
        self.inst = inst
        self.dim = inst.d

    def draw(self, rng: np.random.Generator, m: int):
        return _draw_scenarios(self.inst, rng, m)

    def grad_mean(self, x: np.ndarray, batch) -> np.ndarray:
        a, w = batch
        diff = x - self.inst.x_true
        resid = a @ diff - w
        return (a.T @ resid) / a.shape[0] + _regularizer_gradient(self.inst, x)

    def exact_gradient(self, x: np.ndarray) -> np.ndarray:
        return exact_gradient(self.inst, x)

    def exact_value(self, x: np.ndarray) -> float:
        return exact_value(self.inst, x)


def reference_optimum(inst: SyntheticQpInstance) -> tuple[np.ndarray, float]:
    """Deterministic (x*, f*) from projected gradient with backtracking.

    Starts at the origin and stops at a final step of l1 norm <= 1e-10;
    repeated calls return bit-identical results.
    """
    x_star = pgd_backtracking(
        lambda x: exact_value(inst, x),
        lambda x: exact_gradient(inst, x),
        inst.region,
        np.zeros(inst.d),
    )
    return x_star, exact_value(inst, x_star)
