"""Shared data model: feasible regions, proximal terms, feasibility checks,
and the l-infinity stationarity residual.

All vectors are dense 1-D float64 arrays.  Values are treated as immutable
once constructed; nothing here mutates its inputs, so everything is safe to
share across threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatchError, InfeasibleInputError, UnsupportedRegionError

__all__ = [
    "as_vector",
    "Unconstrained",
    "Box",
    "L1BallBox",
    "Polyhedron",
    "FeasibleRegion",
    "L1Squared",
    "L1BallIndicator",
    "Euclidean",
    "ProxTerm",
    "ResidualReport",
    "region_dimension",
    "is_feasible",
    "residual_inf",
]


def as_vector(x, name: str = "x") -> np.ndarray:
    """Coerce to a finite 1-D float64 array, raising on NaN/Inf or bad shape."""
    arr = np.asarray(x, dtype=float)
    if arr.ndim != 1:
        raise DimensionMismatchError(f"{name} must be 1-D, got shape {arr.shape}")
    if arr.size < 1:
        raise DimensionMismatchError(f"{name} must have length >= 1")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


# ---------------------------------------------------------------------------
# Feasible regions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Unconstrained:
    """X = R^d.  Dimension is inferred from the vectors it is used with."""


@dataclass(frozen=True)
class Box:
    """X = {x : lower <= x <= upper}, with finite strict bounds per coordinate."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "lower", as_vector(self.lower, "lower"))
        object.__setattr__(self, "upper", as_vector(self.upper, "upper"))
        if self.lower.size != self.upper.size:
            raise DimensionMismatchError("box bounds have different lengths")
        if not np.all(self.lower < self.upper):
            raise InfeasibleInputError("box requires lower_i < upper_i for all i")


@dataclass(frozen=True)
class L1BallBox:
    """X = {x : ||x - center||_1 <= radius, lower <= x <= upper}."""

    center: np.ndarray
    radius: float
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "center", as_vector(self.center, "center"))
        object.__setattr__(self, "lower", as_vector(self.lower, "lower"))
        object.__setattr__(self, "upper", as_vector(self.upper, "upper"))
        object.__setattr__(self, "radius", float(self.radius))
        if not (self.center.size == self.lower.size == self.upper.size):
            raise DimensionMismatchError("center/bounds have different lengths")
        if self.radius <= 0:
            raise InfeasibleInputError("radius must be positive")
        if not np.all(self.lower <= self.upper):
            raise InfeasibleInputError("requires lower_i <= upper_i for all i")
        # Nearest box point to the ball center certifies (non)emptiness.
        nearest = np.clip(self.center, self.lower, self.upper)
        if np.abs(nearest - self.center).sum() > self.radius:
            raise InfeasibleInputError("l1 ball and box do not intersect")


@dataclass(frozen=True)
class Polyhedron:
    """X = {x : A x >= b}.  Carried as data only; no solver is attached."""

    A: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        A = np.asarray(self.A, dtype=float)
        if A.ndim != 2:
            raise DimensionMismatchError("A must be a 2-D matrix")
        if not np.all(np.isfinite(A)):
            raise ValueError("A contains non-finite entries")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", as_vector(self.b, "b"))
        if A.shape[0] != self.b.size:
            raise DimensionMismatchError("A rows and b length differ")


FeasibleRegion = Unconstrained | Box | L1BallBox | Polyhedron


# ---------------------------------------------------------------------------
# Proximal terms
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class L1Squared:
    """phi(x) = (rho_hat / 2) * ||x||_1^2 with rho_hat > 0."""

    rho_hat: float

    def __post_init__(self):
        if not (float(self.rho_hat) > 0):
            raise ValueError("rho_hat must be positive")
        object.__setattr__(self, "rho_hat", float(self.rho_hat))


@dataclass(frozen=True)
class L1BallIndicator:
    """phi(x) = indicator of {x : ||x||_1 <= psi} with psi > 0 (step trust region)."""

    psi: float

    def __post_init__(self):
        if not (float(self.psi) > 0):
            raise ValueError("psi must be positive")
        object.__setattr__(self, "psi", float(self.psi))


@dataclass(frozen=True)
class Euclidean:
    """phi = 0: the step reduces to a Euclidean projection."""


ProxTerm = L1Squared | L1BallIndicator | Euclidean


# ---------------------------------------------------------------------------
# Residual report
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ResidualReport:
    """Max-norm distance from 0 to grad f + normal cone, with per-coordinate detail."""

    residual_inf: float
    per_coordinate: np.ndarray
    active_set: tuple[int, ...] = field(default=())


def region_dimension(region: FeasibleRegion) -> int | None:
    """Dimension pinned by the region, or None when unconstrained."""
    if isinstance(region, Unconstrained):
        return None
    if isinstance(region, Box):
        return region.lower.size
    if isinstance(region, L1BallBox):
        return region.center.size
    if isinstance(region, Polyhedron):
        return region.A.shape[1]
    raise UnsupportedRegionError(f"unknown region {type(region).__name__}")


def _check_dim(x: np.ndarray, region: FeasibleRegion):
    dim = region_dimension(region)
    if dim is not None and x.size != dim:
        raise DimensionMismatchError(f"x has length {x.size}, region expects {dim}")


def is_feasible(x, region: FeasibleRegion, tol: float = 0.0) -> bool:
    """True iff all constraints of ``region`` hold with additive slack ``tol``."""
    x = as_vector(x)
    if tol < 0:
        raise ValueError("tol must be nonnegative")
    _check_dim(x, region)
    if isinstance(region, Unconstrained):
        return True
    if isinstance(region, Box):
        return bool(
            np.all(x >= region.lower - tol) and np.all(x <= region.upper + tol)
        )
    if isinstance(region, L1BallBox):
        in_box = np.all(x >= region.lower - tol) and np.all(x <= region.upper + tol)
        in_ball = np.abs(x - region.center).sum() <= region.radius + tol
        return bool(in_box and in_ball)
    if isinstance(region, Polyhedron):
        return bool(np.all(region.A @ x >= region.b - tol))
    raise UnsupportedRegionError(f"unknown region {type(region).__name__}")


def residual_inf(
    x,
    grad,
    region: FeasibleRegion,
    active_tol: float = 1e-10,
) -> ResidualReport:
    """Distance in the max norm from 0 to grad + normal cone of ``region`` at ``x``.

    Supported regions are ``Unconstrained`` and ``Box``.  For a box, the
    per-coordinate contribution is |grad_i| strictly inside, max(0, -grad_i)
    at the lower bound and max(0, grad_i) at the upper bound; the normal cone
    absorbs any inward-pointing component.  A coordinate counts as active when
    it is within ``active_tol`` of a bound.

    Returns a :class:`ResidualReport`; ``residual_inf`` is the max over
    coordinates (the distance is coordinate-separable for these regions).
    """
    x = as_vector(x, "x")
    grad = as_vector(grad, "grad")
    if x.size != grad.size:
        raise DimensionMismatchError("x and grad have different lengths")
    if isinstance(region, Unconstrained):
        contrib = np.abs(grad)
        return ResidualReport(float(contrib.max()), contrib, ())
    if isinstance(region, Box):
        _check_dim(x, region)
        if not is_feasible(x, region, tol=active_tol):
            raise InfeasibleInputError("x is not feasible for the box")
        at_lower = np.abs(x - region.lower) <= active_tol
        at_upper = np.abs(region.upper - x) <= active_tol
        contrib = np.abs(grad)
        contrib = np.where(at_lower, np.maximum(0.0, -grad), contrib)
        contrib = np.where(at_upper & ~at_lower, np.maximum(0.0, grad), contrib)
        # A coordinate pinned at both bounds cannot happen (strict bounds).
        active = tuple(int(i) for i in np.nonzero(at_lower | at_upper)[0])
        return ResidualReport(float(contrib.max()), contrib, active)
    raise UnsupportedRegionError(
        "residual_inf supports Unconstrained and Box regions only"
    )
