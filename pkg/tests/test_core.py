import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from disfom import (
    Box,
    DimensionMismatchError,
    InfeasibleInputError,
    L1BallBox,
    L1Squared,
    Unconstrained,
    UnsupportedRegionError,
    is_feasible,
    residual_inf,
)


def box(lo, hi, d=2):
    return Box(np.full(d, lo), np.full(d, hi))


class TestRegionConstruction:
    def test_box_rejects_degenerate_cells(self):
        with pytest.raises(InfeasibleInputError):
            Box([0.0, 1.0], [0.0, 2.0])

    def test_box_rejects_nonfinite(self):
        with pytest.raises(ValueError):
            Box([0.0], [np.inf])

    def test_l1ballbox_requires_intersection(self):
        # nearest box point to the center is l1-distance 4 away, radius 1
        with pytest.raises(InfeasibleInputError):
            L1BallBox([0.0, 0.0], 1.0, [2.0, 2.0], [3.0, 3.0])

    def test_l1ballbox_allows_equal_bounds(self):
        L1BallBox([0.0, 0.5], 1.0, [0.0, 0.0], [0.0, 1.0])

    def test_prox_term_validation(self):
        with pytest.raises(ValueError):
            L1Squared(0.0)


class TestIsFeasible:
    def test_unconstrained_always_true(self):
        assert is_feasible([0.0], Unconstrained(), 0.0)

    def test_box_boundary_included(self):
        assert is_feasible([3.0, 3.0], box(-3, 3), 0.0)

    def test_ball_violation(self):
        region = L1BallBox(np.zeros(2), 2.0, np.full(2, -20.0), np.full(2, 20.0))
        assert not is_feasible([2.5, 0.0], region)
        assert is_feasible([2.0, 0.0], region)

    def test_tolerance_slack(self):
        assert not is_feasible([3.0 + 1e-6, 0.0], box(-3, 3))
        assert is_feasible([3.0 + 1e-6, 0.0], box(-3, 3), tol=1e-5)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            is_feasible([1.0, 2.0, 3.0], box(-3, 3))


class TestResidualInf:
    def test_unconstrained_is_sup_norm(self):
        rep = residual_inf([0.0, 0.0], [-1.0, 3.0], Unconstrained())
        assert rep.residual_inf == 3.0
        assert rep.active_set == ()

    def test_inward_gradient_absorbed_at_lower_bound(self):
        rep = residual_inf([-3.0, 0.0], [2.0, 0.0], box(-3, 3))
        assert rep.residual_inf == 0.0
        assert rep.active_set == (0,)

    def test_outward_gradient_at_lower_bound(self):
        rep = residual_inf([-3.0, 1.0], [-2.0, 0.5], box(-3, 3))
        assert rep.residual_inf == 2.0
        assert list(rep.per_coordinate) == [2.0, 0.5]

    def test_interior_matches_unconstrained(self):
        g = np.array([0.3, -0.9])
        rep_box = residual_inf([0.5, -1.0], g, box(-3, 3))
        rep_unc = residual_inf([0.5, -1.0], g, Unconstrained())
        assert rep_box.residual_inf == rep_unc.residual_inf

    def test_infeasible_point_rejected(self):
        with pytest.raises(InfeasibleInputError):
            residual_inf([5.0, 0.0], [0.0, 0.0], box(-3, 3))

    def test_l1ballbox_unsupported(self):
        region = L1BallBox(np.zeros(2), 1.0, np.full(2, -2.0), np.full(2, 2.0))
        with pytest.raises(UnsupportedRegionError):
            residual_inf([0.0, 0.0], [1.0, 1.0], region)

    def test_max_of_per_coordinate(self, rng):
        for _ in range(50):
            d = int(rng.integers(1, 20))
            lo = rng.uniform(-5, 0, d)
            hi = rng.uniform(0.5, 5, d)
            x = rng.uniform(lo, hi)
            snap = rng.integers(0, 3, d)
            x = np.where(snap == 1, lo, np.where(snap == 2, hi, x))
            g = rng.standard_normal(d)
            rep = residual_inf(x, g, Box(lo, hi))
            assert rep.residual_inf == rep.per_coordinate.max()

    def test_brute_force_normal_cone_agreement(self, rng):
        """Per coordinate, minimize |g_i + n_i| over normal-cone candidates."""
        for _ in range(200):
            d = int(rng.integers(1, 15))
            lo = rng.uniform(-4, -0.5, d)
            hi = rng.uniform(0.5, 4, d)
            x = rng.uniform(lo, hi)
            snap = rng.integers(0, 3, d)
            x = np.where(snap == 1, lo, np.where(snap == 2, hi, x))
            g = rng.standard_normal(d) * 3
            rep = residual_inf(x, g, Box(lo, hi))
            best = np.empty(d)
            for i in range(d):
                if x[i] == lo[i]:
                    cands = np.concatenate([-np.linspace(0, 10, 2001), [min(-g[i], 0.0)]])
                elif x[i] == hi[i]:
                    cands = np.concatenate([np.linspace(0, 10, 2001), [max(-g[i], 0.0)]])
                else:
                    cands = np.array([0.0])
                best[i] = np.abs(g[i] + cands).min()
            assert abs(rep.residual_inf - best.max()) <= 1e-12


@settings(max_examples=60, deadline=None)
@given(
    g1=st.lists(st.floats(-50, 50), min_size=1, max_size=10),
    shift=st.lists(st.floats(-1, 1), min_size=10, max_size=10),
)
def test_residual_lipschitz_in_gradient(g1, shift):
    """residual_inf is 1-Lipschitz in the gradient under the sup norm."""
    d = len(g1)
    g1 = np.asarray(g1)
    g2 = g1 + np.asarray(shift[:d])
    lo, hi = np.full(d, -2.0), np.full(d, 2.0)
    x = np.clip(np.linspace(-2, 2, d), lo, hi)
    region = Box(lo, hi)
    r1 = residual_inf(x, g1, region).residual_inf
    r2 = residual_inf(x, g2, region).residual_inf
    assert abs(r1 - r2) <= np.abs(g1 - g2).max() + 1e-12
