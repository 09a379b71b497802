import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gambler.exceptions import DivergenceError, InvalidInputError, LearnabilityError
from gambler.numerics import make_rng, minimize_1d, minimize_simplex
from gambler.theory import (
    TheoryPoint,
    complexity_bound,
    entropy,
    generalization_error,
    generalization_gap,
    is_learnable,
    mean_field_loss,
    optimal_prediction,
    perturbative_gap,
    plateau_threshold,
)

# mpmath, 30 digits
H_08 = 0.5004024235381879
H_09 = 0.3250829733914482
GEN_ERR_09_08 = 0.6766389057652433
PLATEAU_05_999 = 1.7912036048017098
GAP_08_2 = 0.13862943611198906
GAP_05_15 = 0.5493061443340548


class TestEntropy:
    @pytest.mark.parametrize("p, expected", [(1.0, 0.0), (0.0, 0.0), (0.5, math.log(2)), (0.8, H_08)])
    def test_values(self, p, expected):
        assert entropy(p) == pytest.approx(expected, abs=1e-15)

    @given(st.floats(0.0, 1.0))
    def test_symmetric(self, p):
        assert entropy(p) == pytest.approx(entropy(1.0 - p), abs=1e-15)

    def test_out_of_range(self):
        with pytest.raises(InvalidInputError):
            entropy(1.1)


class TestGeneralizationError:
    def test_uniform_predictor(self):
        for a in (0.5, 0.8, 1.0):
            assert generalization_error(0.5, 0.5, a) == pytest.approx(math.log(2), abs=1e-15)

    def test_clean_reduces_to_entropy(self):
        assert generalization_error(0.9, 0.9, 1.0) == pytest.approx(H_09, abs=1e-15)

    def test_noisy_value(self):
        assert generalization_error(0.9, 0.9, 0.8) == pytest.approx(GEN_ERR_09_08, abs=1e-12)

    def test_monte_carlo_expectation(self):
        rng = make_rng(2024)
        n = 10**6
        p, a, q = 0.9, 0.8, 0.9
        # smoothed label draw, then symmetric flip with probability 1 - a
        y = rng.random(n) < p
        flip = rng.random(n) >= a
        y = np.where(flip, ~y, y)
        mc = float(np.mean(np.where(y, -math.log(q), -math.log(1 - q))))
        assert abs(mc - generalization_error(q, p, a)) < 3e-3

    @pytest.mark.parametrize("q", [0.0, 1.0])
    def test_divergent(self, q):
        with pytest.raises(DivergenceError):
            generalization_error(q, 0.9, 0.8)


class TestLearnability:
    def test_clean_point(self):
        assert is_learnable(1.0, 1.01)

    def test_unlearnable(self):
        assert not is_learnable(0.6, 1.5)
        x, _ = minimize_simplex(lambda v: -0.6 * math.log(max(v[0] + v[2] / 1.5, 1e-300))
                                - 0.4 * math.log(max(v[1] + v[2] / 1.5, 1e-300)), 3)
        assert x[2] == 1.0

    def test_learnable_interior(self):
        assert is_learnable(0.9, 5.0)
        assert is_learnable(0.9, 2.0)
        x, _ = minimize_simplex(lambda v: -0.9 * math.log(max(v[0] + v[2] / 2.0, 1e-300))
                                - 0.1 * math.log(max(v[1] + v[2] / 2.0, 1e-300)), 3)
        assert 0.0 < x[0] < 1.0 and 0.0 < x[2] < 1.0

    @given(st.floats(0.51, 0.999))
    def test_boundary_is_learnable(self, p):
        assert is_learnable(p, 1.0 / p)
        assert optimal_prediction(p, 1.0 / p)[0] == pytest.approx(0.0, abs=1e-12)

    def test_single_flip_along_lambda(self):
        flags = [is_learnable(0.7, lam) for lam in np.linspace(1.01, 2.0, 500)]
        assert sum(a != b for a, b in zip(flags, flags[1:])) == 1

    def test_theory_point_ranges(self):
        TheoryPoint(0.9, 0.8, 2.0)
        with pytest.raises(InvalidInputError):
            TheoryPoint(0.4, 0.8, 2.0)


class TestOptimalPrediction:
    def test_clean_point(self):
        assert optimal_prediction(1.0, 1.7) == (1.0, 0.0)

    @pytest.mark.parametrize("p, lam, expected", [(0.9, 5.0, (0.875, 0.125)), (0.8, 2.0, (0.6, 0.4))])
    def test_values(self, p, lam, expected):
        np.testing.assert_allclose(optimal_prediction(p, lam), expected, atol=1e-15)
        x, _ = minimize_1d(lambda ph: -p * math.log(ph + (1 - ph) / lam) - (1 - p) * math.log((1 - ph) / lam + 1e-300),
                           0.0, 1.0)
        assert abs(x - expected[0]) < 1e-6

    def test_unlearnable_raises(self):
        with pytest.raises(LearnabilityError):
            optimal_prediction(0.6, 1.5)

    @given(st.floats(0.51, 1.0), st.floats(0.0, 1.0))
    def test_masses_sum_to_one(self, p, t):
        lam = 1.0 / p + t * (2.0 - 1.0 / p) + 1e-9
        ps, f0 = optimal_prediction(p, lam)
        assert ps + f0 == pytest.approx(1.0, abs=1e-12)


class TestComplexityBound:
    def test_values(self):
        assert complexity_bound(2.0) == pytest.approx(math.log(2), abs=1e-15)
        assert complexity_bound(1.25) == pytest.approx(H_08, abs=1e-15)

    def test_vanishes_near_one(self):
        assert complexity_bound(1.0 + 1e-9) < 1e-7


class TestGaps:
    def test_clean_gap_is_exactly_zero(self):
        for lam in (1.1, 2.0, 9.99):
            assert generalization_gap(1.0, lam) == 0.0

    @pytest.mark.parametrize("a, lam, expected", [(0.8, 2.0, GAP_08_2), (0.5, 1.5, GAP_05_15)])
    def test_values_and_limit(self, a, lam, expected):
        assert generalization_gap(a, lam) == pytest.approx(expected, abs=1e-15)
        p = 1 - 1e-6
        ps, _ = optimal_prediction(p, lam)
        exact = generalization_error(p, p, a) - generalization_error(ps, p, a)
        assert abs(exact - expected) < 1e-3

    @given(st.floats(0.0, 0.999), st.floats(1.01, 100.0))
    def test_positive_with_noise(self, a, lam):
        assert generalization_gap(a, lam) > 0

    def test_perturbative_value(self):
        assert perturbative_gap(0.99, 0.8, 2.0) == pytest.approx(0.198, abs=1e-15)
        assert perturbative_gap(0.99, 1.0, 2.0) == 0.0

    def test_both_vanish_for_large_lambda(self):
        assert generalization_gap(0.8, 1e9) < 1e-9
        assert perturbative_gap(0.99, 0.8, 1e9) < 1e-9

    def test_perturbative_tracks_exact_gap(self):
        p, a = 0.999, 0.7
        for lam in (50.0, 200.0, 1000.0):
            ps, _ = optimal_prediction(p, lam)
            exact = generalization_error(p, p, a) - generalization_error(ps, p, a)
            assert abs(perturbative_gap(p, a, lam) - exact) / exact < 1.0 / lam


class TestPlateau:
    def test_clean(self):
        assert plateau_threshold(1.0, 5.0).threshold == 0.0

    def test_acceptance_spot(self):
        est = plateau_threshold(0.5, 9.99)
        assert est.threshold == pytest.approx(PLATEAU_05_999, abs=1e-12)
        assert abs(est.threshold - 1.791203) < 1e-6
        assert (est.clean_rate, est.lam) == (0.5, 9.99)

    def test_lambda_two(self):
        assert plateau_threshold(0.8, 2.0).threshold == pytest.approx(H_08, abs=1e-15)

    @pytest.mark.parametrize("a, lam", [(0.5, 9.99), (0.8, 2.0), (0.7, 4.0)])
    def test_matches_mean_field_minimum(self, a, lam):
        _, fmin = minimize_1d(lambda ph: mean_field_loss(ph, a, lam), 0.0, 1.0, tol=1e-12)
        assert abs(plateau_threshold(a, lam).threshold - fmin) < 1e-8

    @given(st.floats(0.5, 1.0), st.floats(2.0, 50.0))
    def test_non_negative_from_lambda_two(self, a, lam):
        assert plateau_threshold(a, lam).threshold >= 0.0

    def test_formula_identity(self):
        for a, lam in [(0.6, 3.0), (0.9, 7.5)]:
            expected = entropy(a) + (1 - a) * math.log(lam - 1)
            assert abs(plateau_threshold(a, lam).threshold - expected) < 1e-12

    def test_out_of_range(self):
        with pytest.raises(InvalidInputError):
            plateau_threshold(0.4, 2.0)
