"""Gradient estimators: minibatch averaging and recursive variance reduction.

Estimators are pure functions of an oracle, a point, and a random stream.
The recursive estimator threads its memory through an explicit
:class:`SpiderState` value, so one optimization run is serialized while any
number of runs proceed concurrently on their own streams.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass
from math import ceil

import numpy as np

from .core import as_vector
from .errors import DimensionMismatchError, OracleCapabilityError

__all__ = [
    "StochasticOracle",
    "Minibatch",
    "Spider",
    "EstimatorConfig",
    "SpiderState",
    "minibatch_gradient",
    "spider_step",
    "spider_total_evaluations",
    "minibatch_total_evaluations",
    "variance_probe_inf",
]


class StochasticOracle(ABC):
    """Interface to a stochastic first-order oracle.

    ``draw`` produces an opaque batch of i.i.d. scenario samples;
    ``grad_mean`` averages the sampled gradients of that batch at a point.
    Keeping the batch explicit lets the recursive estimator evaluate the same
    scenarios at two points (paired sampling).  Oracles may additionally
    expose exact values/gradients and a known optimum for metrics.
    """

    dim: int

    @abstractmethod
    def draw(self, rng: np.random.Generator, m: int):
        """Return a batch of ``m`` i.i.d. scenario samples."""

    @abstractmethod
    def grad_mean(self, x: np.ndarray, batch) -> np.ndarray:
        """Mean sampled gradient over ``batch`` evaluated at ``x``."""

    def exact_gradient(self, x: np.ndarray) -> np.ndarray:
        raise OracleCapabilityError(f"{type(self).__name__} has no exact gradient")

    def exact_value(self, x: np.ndarray) -> float:
        raise OracleCapabilityError(f"{type(self).__name__} has no exact value")

    @property
    def has_exact_gradient(self) -> bool:
        return type(self).exact_gradient is not StochasticOracle.exact_gradient

    @property
    def has_exact_value(self) -> bool:
        return type(self).exact_value is not StochasticOracle.exact_value


@dataclass(frozen=True)
class Minibatch:
    """Plain average of m sampled gradients per step."""

    m: int

    def __post_init__(self):
        if int(self.m) < 1:
            raise ValueError("batch size m must be >= 1")
        object.__setattr__(self, "m", int(self.m))


@dataclass(frozen=True)
class Spider:
    """Recursive paired-difference estimator refreshed every q0 steps.

    A refresh step averages m1 fresh samples; every other step draws m
    samples, evaluates them at both the current and the previous point, and
    corrects the previous estimate with the paired difference.
    """

    q0: int
    m1: int
    m: int

    def __post_init__(self):
        for name in ("q0", "m1", "m"):
            val = int(getattr(self, name))
            if val < 1:
                raise ValueError(f"{name} must be >= 1")
            object.__setattr__(self, name, val)


EstimatorConfig = Minibatch | Spider


@dataclass(frozen=True)
class SpiderState:
    """Recursion memory: previous estimate, previous point, and the step index."""

    last_estimate: np.ndarray
    last_point: np.ndarray
    step_index: int

    def __post_init__(self):
        if self.last_estimate.size != self.last_point.size:
            raise DimensionMismatchError("estimate and point have different lengths")
        if self.step_index < 1:
            raise ValueError("step_index starts at 1")


def minibatch_gradient(
    oracle: StochasticOracle, x, m: int, rng: np.random.Generator
) -> np.ndarray:
    """Average of ``m`` independent sampled gradients at ``x``.

    Consumes exactly ``m`` oracle draws; bit-deterministic given the stream.
    """
    x = as_vector(x, "x")
    if int(m) < 1:
        raise ValueError("m must be >= 1")
    batch = oracle.draw(rng, int(m))
    return oracle.grad_mean(x, batch)


def spider_step(
    oracle: StochasticOracle,
    x,
    state: SpiderState | None,
    cfg: Spider,
    rng: np.random.Generator,
) -> tuple[np.ndarray, SpiderState]:
    """Advance the recursive estimator by one step and return (estimate, state).

    Step k is a refresh iff mod(k, q0) = 1 with k starting at 1 (equivalently
    k == n_k where n_k = floor((k-1)/q0) * q0 + 1); a missing state means
    k = 1.  Off-refresh steps use the same m draws at both x and the previous
    point, so the paired difference telescopes exactly for noiseless oracles.
    """
    x = as_vector(x, "x")
    k = 1 if state is None else state.step_index + 1
    if state is not None and state.last_point.size != x.size:
        raise DimensionMismatchError("state dimension does not match x")
    refresh = (k - 1) % cfg.q0 == 0
    if state is None and not refresh:
        raise ValueError("missing state: step k=1 must be a refresh step")
    if refresh:
        estimate = minibatch_gradient(oracle, x, cfg.m1, rng)
    else:
        batch = oracle.draw(rng, cfg.m)
        delta = oracle.grad_mean(x, batch) - oracle.grad_mean(state.last_point, batch)
        estimate = delta + state.last_estimate
    return estimate, SpiderState(estimate, x, k)


def spider_total_evaluations(K: int, cfg: Spider) -> int:
    """Gradient evaluations of a K-step run; paired evaluations count twice."""
    refreshes = ceil(K / cfg.q0)
    return refreshes * cfg.m1 + (K - refreshes) * 2 * cfg.m


def minibatch_total_evaluations(K: int, cfg: Minibatch) -> int:
    return K * cfg.m


def variance_probe_inf(
    oracle: StochasticOracle,
    x,
    m: int,
    trials: int,
    rng: np.random.Generator,
) -> float:
    """Monte-Carlo estimate of E ||minibatch_gradient - grad f(x)||_inf^2.

    Requires the oracle's exact gradient; at least 30 trials are demanded so
    the estimate carries meaningful precision.
    """
    if trials < 30:
        raise ValueError("trials must be >= 30")
    x = as_vector(x, "x")
    g = oracle.exact_gradient(x)
    acc = 0.0
    for _ in range(trials):
        est = minibatch_gradient(oracle, x, m, rng)
        acc += float(np.abs(est - g).max() ** 2)
    return acc / trials
