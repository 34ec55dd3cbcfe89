"""Small configurable oracles for exercising the estimators and optimizers."""

import numpy as np

from disfom import OracleCapabilityError, StochasticOracle


class NoiselessOracle(StochasticOracle):
    """Sampled gradient identical to the exact gradient."""

    def __init__(self, dim, grad_fn, value_fn=None):
        self.dim = dim
        self._grad = grad_fn
        self._value = value_fn

    def draw(self, rng, m):
        return m

    def grad_mean(self, x, batch):
        return self._grad(x)

    def exact_gradient(self, x):
        return self._grad(x)

    def exact_value(self, x):
        if self._value is None:
            raise OracleCapabilityError("no value function configured")
        return self._value(x)

    @property
    def has_exact_value(self):
        return self._value is not None


class AdditiveNoiseOracle(StochasticOracle):
    """G(x, z) = grad f(x) + z with i.i.d. uniform [-half, half] coordinates."""

    def __init__(self, dim, grad_fn, half_width=1.0, value_fn=None):
        self.dim = dim
        self._grad = grad_fn
        self.half_width = half_width
        self._value = value_fn

    def draw(self, rng, m):
        return rng.uniform(-self.half_width, self.half_width, (m, self.dim))

    def grad_mean(self, x, batch):
        return self._grad(x) + batch.mean(axis=0)

    def exact_gradient(self, x):
        return self._grad(x)

    def exact_value(self, x):
        if self._value is None:
            raise OracleCapabilityError("no value function configured")
        return self._value(x)

    @property
    def has_exact_value(self):
        return self._value is not None


class LinearOracle(StochasticOracle):
    """Sampled gradient (A + E) x + (b + e) with zero-mean E, e."""

    def __init__(self, A, b, noise=0.5):
        self.A = np.asarray(A, dtype=float)
        self.b = np.asarray(b, dtype=float)
        self.dim = self.b.size
        self.noise = noise

    def draw(self, rng, m):
        E = rng.uniform(-self.noise, self.noise, (m, self.dim, self.dim))
        e = rng.uniform(-self.noise, self.noise, (m, self.dim))
        return E, e

    def grad_mean(self, x, batch):
        E, e = batch
        return (self.A + E.mean(axis=0)) @ x + self.b + e.mean(axis=0)

    def exact_gradient(self, x):
        return self.A @ x + self.b


class RecordingOracle(StochasticOracle):
    """Wrapper logging every draw and every gradient evaluation."""

    def __init__(self, inner):
        self.inner = inner
        self.dim = inner.dim
        self.draw_sizes = []
        self.eval_log = []  # (batch id, batch size, x snapshot)

    def draw(self, rng, m):
        self.draw_sizes.append(m)
        return (len(self.draw_sizes) - 1, self.inner.draw(rng, m), m)

    def grad_mean(self, x, batch):
        batch_id, inner_batch, m = batch
        self.eval_log.append((batch_id, m, np.array(x)))
        return self.inner.grad_mean(x, inner_batch)

    def exact_gradient(self, x):
        return self.inner.exact_gradient(x)

    @property
    def draws_consumed(self):
        return sum(self.draw_sizes)

    @property
    def evaluations(self):
        return sum(m for _, m, _ in self.eval_log)
