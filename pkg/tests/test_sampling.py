import numpy as np
import pytest

from disfom import (
    Minibatch,
    OracleCapabilityError,
    Spider,
    minibatch_gradient,
    minibatch_total_evaluations,
    spider_step,
    spider_total_evaluations,
    variance_probe_inf,
)
from disfom.optimizers import step_stream
from tests.toys import AdditiveNoiseOracle, LinearOracle, NoiselessOracle, RecordingOracle


def quad_grad(x):
    return 2.0 * x


class TestMinibatch:
    def test_noiseless_mean_is_exact(self, rng):
        oracle = NoiselessOracle(3, quad_grad)
        x = np.array([1.0, -2.0, 0.5])
        for m in (1, 7, 64):
            np.testing.assert_array_equal(
                minibatch_gradient(oracle, x, m, rng), quad_grad(x)
            )

    def test_single_sample_is_raw_draw(self):
        oracle = AdditiveNoiseOracle(4, quad_grad)
        x = np.zeros(4)
        g1 = minibatch_gradient(oracle, x, 1, np.random.default_rng(5))
        raw = np.random.default_rng(5).uniform(-1.0, 1.0, (1, 4))[0]
        np.testing.assert_array_equal(g1, quad_grad(x) + raw)

    def test_monte_carlo_unbiased(self):
        oracle = AdditiveNoiseOracle(4, quad_grad)
        x = np.array([0.3, -1.2, 2.0, 0.0])
        rng = np.random.default_rng(77)
        n = 100_000
        acc = np.zeros(4)
        for _ in range(n):
            acc += minibatch_gradient(oracle, x, 1, rng) - quad_grad(x)
        mean_err = acc / n
        # coordinate std of uniform[-1,1] is 1/sqrt(3); 3 standard errors
        se = (1.0 / np.sqrt(3.0)) / np.sqrt(n)
        assert np.all(np.abs(mean_err) < 3.0 * se)

    def test_determinism(self):
        oracle = AdditiveNoiseOracle(6, quad_grad)
        x = np.ones(6)
        a = minibatch_gradient(oracle, x, 9, np.random.default_rng(3))
        b = minibatch_gradient(oracle, x, 9, np.random.default_rng(3))
        np.testing.assert_array_equal(a, b)

    def test_accounting(self):
        assert minibatch_total_evaluations(300, Minibatch(1000)) == 300_000


class TestSpider:
    def test_noiseless_telescopes_to_exact(self, rng):
        oracle = NoiselessOracle(3, quad_grad)
        cfg = Spider(q0=4, m1=5, m=2)
        state = None
        x = np.array([1.0, 2.0, -1.0])
        for k in range(1, 12):
            x = x * 0.9 + 0.1
            g, state = spider_step(oracle, x, state, cfg, rng)
            np.testing.assert_allclose(g, quad_grad(x), atol=1e-12)
            assert state.step_index == k

    def test_q0_one_equals_minibatch(self):
        oracle = AdditiveNoiseOracle(5, quad_grad)
        cfg = Spider(q0=1, m1=8, m=3)
        x = np.linspace(-1, 1, 5)
        state = None
        for k in (1, 2, 3):
            g_sp, state = spider_step(oracle, x, state, cfg, step_stream(11, k))
            g_mb = minibatch_gradient(oracle, x, 8, step_stream(11, k))
            np.testing.assert_array_equal(g_sp, g_mb)

    def test_missing_state_rejected_off_refresh(self):
        oracle = NoiselessOracle(2, quad_grad)
        cfg = Spider(q0=3, m1=4, m=2)
        g, state = spider_step(oracle, np.zeros(2), None, cfg, np.random.default_rng(0))
        assert state.step_index == 1

    def test_paired_sampling_same_batch_both_points(self, rng):
        oracle = RecordingOracle(AdditiveNoiseOracle(3, quad_grad))
        cfg = Spider(q0=5, m1=6, m=2)
        state = None
        xs = [np.full(3, float(k)) for k in range(1, 5)]
        for x in xs:
            _, state = spider_step(oracle, x, state, cfg, rng)
        # steps 2..4 are off-refresh: each must evaluate one batch twice,
        # at the current and at the previous point
        pair_evals = oracle.eval_log[1:]
        assert len(pair_evals) == 6
        for i, (first, second) in enumerate(zip(pair_evals[::2], pair_evals[1::2])):
            assert first[0] == second[0]  # identical batch object
            np.testing.assert_array_equal(first[2], xs[i + 1])
            np.testing.assert_array_equal(second[2], xs[i])

    def test_sample_accounting_exact(self, rng):
        cfg = Spider(q0=9, m1=1000, m=100)
        K = 1350
        refreshes = -(-K // 9)
        expected = refreshes * 1000 + (K - refreshes) * 2 * 100
        assert spider_total_evaluations(K, cfg) == expected == 390_000

        oracle = RecordingOracle(NoiselessOracle(2, quad_grad))
        small = Spider(q0=3, m1=7, m=2)
        state = None
        K_small = 10
        for k in range(1, K_small + 1):
            _, state = spider_step(oracle, np.full(2, float(k)), state, small, rng)
        assert oracle.evaluations == spider_total_evaluations(K_small, small)
        refreshes = -(-K_small // 3)
        assert oracle.draws_consumed == refreshes * 7 + (K_small - refreshes) * 2

    def test_monte_carlo_unbiased_recursion(self):
        A = np.array([[2.0, 0.3, 0.0], [0.3, 1.5, -0.2], [0.0, -0.2, 1.0]])
        b = np.array([0.5, -1.0, 0.25])
        oracle = LinearOracle(A, b, noise=0.6)
        cfg = Spider(q0=3, m1=4, m=2)
        path = [np.array([1.0, 0.0, -1.0]) * (0.8**k) for k in range(5)]
        reps = 10_000
        rng = np.random.default_rng(2024)
        acc = np.zeros(3)
        acc_sq = np.zeros(3)
        for _ in range(reps):
            state = None
            for x in path:
                g, state = spider_step(oracle, x, state, cfg, rng)
            err = g - oracle.exact_gradient(path[-1])
            acc += err
            acc_sq += err**2
        mean = acc / reps
        se = np.sqrt((acc_sq / reps - mean**2).clip(0) / reps)
        assert np.all(np.abs(mean) <= 3.0 * se + 1e-12)

    def test_determinism_bit_identical(self):
        oracle = AdditiveNoiseOracle(4, quad_grad)
        cfg = Spider(q0=2, m1=5, m=2)

        def run():
            state, out = None, []
            for k in range(1, 7):
                g, state = spider_step(
                    oracle, np.full(4, float(k)), state, cfg, step_stream(99, k)
                )
                out.append(g)
            return np.array(out)

        np.testing.assert_array_equal(run(), run())


class TestVarianceProbe:
    def test_noiseless_zero(self, rng):
        oracle = NoiselessOracle(5, quad_grad)
        assert variance_probe_inf(oracle, np.ones(5), 3, 50, rng) == 0.0

    def test_requires_exact_gradient(self, rng):
        from disfom import StochasticOracle

        class Bare(StochasticOracle):
            dim = 2

            def draw(self, rng, m):
                return m

            def grad_mean(self, x, batch):
                return np.zeros(2)

        assert not Bare().has_exact_gradient
        with pytest.raises(OracleCapabilityError):
            variance_probe_inf(Bare(), np.zeros(2), 2, 50, rng)

    def test_trials_floor(self, rng):
        oracle = NoiselessOracle(2, quad_grad)
        with pytest.raises(ValueError):
            variance_probe_inf(oracle, np.zeros(2), 2, 10, rng)

    def test_quarter_batch_shrink(self):
        oracle = AdditiveNoiseOracle(64, quad_grad)
        x = np.zeros(64)
        small = variance_probe_inf(oracle, x, 8, 3000, np.random.default_rng(1))
        large = variance_probe_inf(oracle, x, 32, 3000, np.random.default_rng(2))
        assert small / large >= 2.0

    def test_uniform_noise_unit_batch_range(self):
        """E max_i of squared uniform[-1,1] means, d=100, m=1: 50/51 ~ 0.98."""
        oracle = AdditiveNoiseOracle(100, quad_grad)
        est = variance_probe_inf(
            oracle, np.zeros(100), 1, 10_000, np.random.default_rng(3)
        )
        assert 0.5 <= est <= 1.0
