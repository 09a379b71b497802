import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gambler.exceptions import InvalidInputError
from gambler.stopping import (
    AesConfig,
    Decision,
    Stage,
    VesConfig,
    aes_scan,
    aes_should_stop,
    detect_stages,
    smooth,
    ves_scan,
    ves_should_stop,
)

THRESHOLD = 1.7912036048017098


class TestSmooth:
    def test_trailing_average(self):
        np.testing.assert_allclose(smooth([3.0, 1.0, 2.0, 6.0], 3), [3.0, 2.0, 2.0, 3.0])

    def test_window_one_is_identity(self):
        h = [0.3, 0.1, 0.7]
        np.testing.assert_allclose(smooth(h, 1), h, rtol=1e-15)


class TestAes:
    cfg = AesConfig(clean_rate=0.5, lambda_ref=9.99)

    def test_threshold(self):
        assert self.cfg.threshold == pytest.approx(THRESHOLD, abs=1e-12)

    def test_constant_at_threshold_stops_at_min_epochs(self):
        out = aes_scan([THRESHOLD] * 10, self.cfg)
        assert out == type(out)(Decision.STOP_AT_PLATEAU, 3)

    def test_descending_history(self):
        h = [2.30, 2.20, 2.10, 2.00, 1.90, 1.85, 1.80, 1.79, 1.60, 1.20]
        avg = smooth(h, 3)
        first = next(i + 1 for i, v in enumerate(avg) if i + 1 >= 3 and abs(v - THRESHOLD) <= 0.15)
        out = aes_scan(h, self.cfg)
        assert out.decision is Decision.STOP_AT_PLATEAU
        assert out.epoch == first == 6

    def test_overshoot(self):
        out = aes_scan([2.3, 1.0, 0.5, 0.3], self.cfg)
        assert out.decision is Decision.OVERSHOOT_WARNING
        assert out.epoch == 3

    def test_continue_above_band(self):
        assert aes_should_stop([2.3, 2.2, 2.1], self.cfg) is Decision.CONTINUE

    def test_window_one_reacts_to_single_epoch(self):
        cfg = AesConfig(0.5, 9.99, smoothing_window=1, min_epochs=1)
        assert aes_scan([2.3, 1.8], cfg).epoch == 2

    def test_validation(self):
        with pytest.raises(InvalidInputError):
            AesConfig(0.4, 2.0)
        with pytest.raises(InvalidInputError):
            AesConfig(0.8, 2.0, band=0.0)
        with pytest.raises(InvalidInputError):
            aes_scan([], self.cfg)


class TestVes:
    cfg = VesConfig(patience=5)

    def test_strictly_increasing_never_stops(self):
        out = ves_scan(np.linspace(0.1, 0.9, 40), self.cfg)
        assert out.decision is Decision.CONTINUE
        assert out.best_epoch == 40

    def test_flat_after_first(self):
        out = ves_scan([0.9, 0.89, 0.89, 0.89, 0.89, 0.89], self.cfg)
        assert (out.decision, out.stop_epoch, out.best_epoch) == (Decision.STOP, 6, 1)

    def test_late_spike_within_patience(self):
        h = [0.5, 0.6, 0.7, 0.69, 0.68, 0.67, 0.75, 0.74, 0.73]
        assert ves_should_stop(h, self.cfg) is Decision.CONTINUE

    def test_equal_value_is_not_an_improvement(self):
        out = ves_scan([0.8] * 6, self.cfg)
        assert out.stop_epoch == 6 and out.best_epoch == 1

    @given(st.lists(st.floats(0.0, 1.0), min_size=1, max_size=40))
    def test_reported_epoch_has_maximum(self, h):
        out = ves_scan(h, self.cfg)
        seen = h[: out.stop_epoch] if out.stop_epoch else h
        assert h[out.best_epoch - 1] == max(seen)

    def test_validation(self):
        with pytest.raises(InvalidInputError):
            VesConfig(patience=0)
        with pytest.raises(InvalidInputError):
            VesConfig(split_fraction=0.0)


class TestStages:
    def test_monotone_descent_passes_all_stages(self):
        h = np.linspace(2.5, 1.0, 30)
        stages = detect_stages(h, THRESHOLD)
        seen = [s for i, s in enumerate(stages) if i == 0 or s != stages[i - 1]]
        assert seen == [Stage.FAST_LEARNING, Stage.GAP, Stage.MEMORIZATION]

    def test_never_reaching_band(self):
        assert set(detect_stages([3.0, 2.9, 2.8], THRESHOLD)) == {Stage.FAST_LEARNING}

    def test_no_regression_after_rebound(self):
        h = [2.5, 1.8, 1.8, 1.8, 2.5, 2.5, 2.5]
        stages = detect_stages(h, THRESHOLD, window=1)
        assert stages[-1] is Stage.GAP

    @given(st.lists(st.floats(0.0, 5.0), min_size=1, max_size=50))
    def test_order_never_decreases(self, h):
        order = [Stage.FAST_LEARNING, Stage.GAP, Stage.MEMORIZATION]
        idx = [order.index(s) for s in detect_stages(h, THRESHOLD)]
        assert idx == sorted(idx)
