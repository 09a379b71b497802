import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gambler.exceptions import DegeneratePredictionError, InvalidHyperparameterError, InvalidInputError
from gambler.losses import PredictionVector
from gambler.schedule import (
    LAMBDA_MIN_OFFSET,
    LambdaSchedule,
    batch_lambda,
    jensen_ordering,
    lambda_euc,
    lambda_exp,
    schedule_batch,
    schedule_lambda,
)

# mpmath, 30 digits
EUC_532 = 2.6315789473684212
EXP_532 = 2.8000940728538313
JENSEN_4312 = (2.4615384615384617, 3.076923076923077, 3.3116889107026298)


def pv(probs, rej=0.0):
    return PredictionVector(np.asarray(probs, dtype=float), rej)


heads = st.lists(st.floats(0.0, 1.0), min_size=3, max_size=11).filter(lambda w: sum(w[1:]) > 1e-6)


class TestEuc:
    def test_one_hot(self):
        assert lambda_euc(pv([0.0, 1.0, 0.0])) == 1.0

    @pytest.mark.parametrize("m", [2, 3, 10])
    def test_uniform(self, m):
        assert lambda_euc(pv(np.full(m, 1.0 / m))) == pytest.approx(m, rel=1e-14)

    def test_value(self):
        assert lambda_euc(pv([0.5, 0.3, 0.2])) == pytest.approx(EUC_532, rel=1e-14)

    def test_rejection_form(self):
        f = np.array([0.4, 0.3, 0.1])
        assert lambda_euc(pv(f, 0.2)) == pytest.approx((1 - 0.2) ** 2 / np.sum(f**2), rel=1e-14)

    @given(heads)
    def test_range_and_scale_invariance(self, w):
        w = np.asarray(w)
        head = w / w.sum()
        m = head.size - 1
        lam = lambda_euc(PredictionVector.from_head(head))
        assert 1.0 - 1e-12 <= lam <= m + 1e-12
        f = head[1:] / head[1:].sum()
        assert lam == pytest.approx(lambda_euc(pv(f)), rel=1e-12)

    def test_degenerate(self):
        with pytest.raises(DegeneratePredictionError):
            lambda_euc(pv([0.0, 0.0], 1.0))


class TestExp:
    def test_one_hot(self):
        assert lambda_exp(pv([1.0, 0.0, 0.0])) == 1.0

    @pytest.mark.parametrize("m", [2, 4, 10])
    def test_uniform(self, m):
        assert lambda_exp(pv(np.full(m, 1.0 / m))) == pytest.approx(m, rel=1e-14)

    def test_value(self):
        assert lambda_exp(pv([0.5, 0.3, 0.2])) == pytest.approx(EXP_532, rel=1e-14)

    @given(st.lists(st.floats(0.0, 1.0), min_size=2, max_size=10).filter(lambda w: sum(w) > 1e-6))
    def test_range_without_rejection(self, w):
        f = np.asarray(w) / np.sum(w)
        assert 1.0 - 1e-12 <= lambda_exp(pv(f)) <= f.size * (1 + 1e-12)

    def test_can_exceed_m_with_rejection(self):
        assert lambda_exp(pv([0.4, 0.3, 0.1], 0.2)) > 3.0


class TestJensen:
    def test_one_hot(self):
        assert jensen_ordering(pv([0.0, 1.0])) == (1.0, 1.0, 1.0)

    def test_uniform(self):
        np.testing.assert_allclose(jensen_ordering(pv([0.25] * 4)), (4, 4, 4), rtol=1e-14)

    def test_values(self):
        np.testing.assert_allclose(jensen_ordering(pv([0.4, 0.3, 0.1], 0.2)), JENSEN_4312, rtol=1e-13)

    @given(heads)
    def test_ordering(self, w):
        w = np.asarray(w)
        euc, mid, exp = jensen_ordering(PredictionVector.from_head(w / w.sum()))
        assert euc <= mid * (1 + 1e-12)
        assert mid <= exp * (1 + 1e-12)


class TestSchedule:
    def test_fixed(self):
        assert schedule_lambda(pv([0.5, 0.5]), LambdaSchedule("fixed", 1.6), 20) == 1.6

    def test_warmup_uses_m(self):
        assert schedule_lambda(pv([0.5, 0.3, 0.2]), LambdaSchedule("euc", warmup_epochs=10), 3) == 3.0

    def test_after_warmup(self):
        lam = schedule_lambda(pv([0.5, 0.3, 0.2]), LambdaSchedule("euc", warmup_epochs=10), 11)
        assert lam == pytest.approx(EUC_532, rel=1e-14)

    def test_clipped_to_valid_range(self):
        s = LambdaSchedule("exp")
        assert schedule_lambda(pv([0.4, 0.3, 0.1], 0.2), s, 0) == 3.0
        assert schedule_lambda(pv([1.0, 0.0, 0.0]), s, 0) == 1.0 + LAMBDA_MIN_OFFSET

    def test_batch_degenerate_rows_get_m(self):
        f = np.array([[0.0, 0.0, 0.0], [0.2, 0.2, 0.2]])
        np.testing.assert_allclose(batch_lambda(f, "euc"), [3.0, 3.0])
        # second row: exp(H(uniform)) / class mass = 3 / 0.6
        np.testing.assert_allclose(batch_lambda(f, "exp"), [3.0, 5.0], rtol=1e-14)

    def test_batch_matches_scalar(self):
        rng = np.random.default_rng(0)
        head = rng.dirichlet(np.ones(5), 50)
        for mode, fn in (("euc", lambda_euc), ("exp", lambda_exp)):
            expected = [fn(PredictionVector.from_head(h)) for h in head]
            np.testing.assert_allclose(batch_lambda(head[:, 1:], mode), expected, rtol=1e-13)
        out = schedule_batch(head[:, 1:], LambdaSchedule("exp"), 0)
        assert np.all(out <= 4.0) and np.all(out > 1.0)

    def test_invalid(self):
        with pytest.raises(InvalidInputError):
            LambdaSchedule("cosine")
        with pytest.raises(InvalidInputError):
            LambdaSchedule("fixed")
        with pytest.raises(InvalidHyperparameterError):
            LambdaSchedule("fixed", 1.0)
        with pytest.raises(InvalidInputError):
            LambdaSchedule("euc", warmup_epochs=-1)
