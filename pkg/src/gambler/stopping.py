"""Early stopping: analytical (plateau-based) and validation-based."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

from .exceptions import InvalidInputError
from .theory import plateau_threshold


class Decision(str, Enum):
    CONTINUE = "continue"
    STOP_AT_PLATEAU = "stop-at-plateau"
    OVERSHOOT_WARNING = "overshoot-warning"
    STOP = "stop"


class Stage(str, Enum):
    FAST_LEARNING = "fast-learning"
    GAP = "gap"
    MEMORIZATION = "memorization"


_STAGE_ORDER = [Stage.FAST_LEARNING, Stage.GAP, Stage.MEMORIZATION]


@dataclass(frozen=True)
class AesConfig:
    clean_rate: float
    lambda_ref: float
    band: float = 0.15
    smoothing_window: int = 3
    min_epochs: int = 3

    def __post_init__(self):
        if not self.band > 0:
            raise InvalidInputError("band must be positive")
        if self.smoothing_window < 1:
            raise InvalidInputError("smoothing_window must be >= 1")
        if not 0.5 <= self.clean_rate <= 1.0:
            raise InvalidInputError("clean_rate must lie in [0.5, 1]")
        if self.min_epochs < 0:
            raise InvalidInputError("min_epochs must be >= 0")

    @property
    def threshold(self) -> float:
        return plateau_threshold(self.clean_rate, self.lambda_ref).threshold


@dataclass(frozen=True)
class VesConfig:
    patience: int = 5
    split_fraction: float = 0.1

    def __post_init__(self):
        if self.patience < 1:
            raise InvalidInputError("patience must be >= 1")
        if not 0.0 < self.split_fraction < 0.5:
            raise InvalidInputError("split_fraction must lie in (0, 0.5)")


def smooth(history: Sequence[float], window: int) -> np.ndarray:
    """Trailing moving average; the first ``window - 1`` entries average what exists."""
    h = np.asarray(history, dtype=np.float64)
    c = np.concatenate([[0.0], np.cumsum(h)])
    idx = np.arange(1, h.size + 1)
    lo = np.maximum(idx - window, 0)
    return (c[idx] - c[lo]) / (idx - lo)


@dataclass(frozen=True)
class AesOutcome:
    decision: Decision
    epoch: int | None
    """1-based epoch at which the decision was taken (``None`` while continuing)."""


def aes_scan(loss_history: Sequence[float], cfg: AesConfig, threshold: float | None = None) -> AesOutcome:
    """Replay the plateau criterion over a whole training-loss history.

    The first epoch (at or after ``min_epochs``) whose smoothed loss lies in
    ``[threshold - band, threshold + band]`` stops training.  A smoothed loss
    below the band before that means the plateau was skipped.
    """
    if len(loss_history) == 0:
        raise InvalidInputError("loss history is empty")
    thr = cfg.threshold if threshold is None else threshold
    avg = smooth(loss_history, cfg.smoothing_window)
    for i, v in enumerate(avg):
        epoch = i + 1
        if v < thr - cfg.band:
            return AesOutcome(Decision.OVERSHOOT_WARNING, epoch)
        if epoch >= cfg.min_epochs and v <= thr + cfg.band:
            return AesOutcome(Decision.STOP_AT_PLATEAU, epoch)
    return AesOutcome(Decision.CONTINUE, None)


def aes_should_stop(loss_history: Sequence[float], cfg: AesConfig) -> Decision:
    return aes_scan(loss_history, cfg).decision


@dataclass(frozen=True)
class VesOutcome:
    decision: Decision
    stop_epoch: int | None
    best_epoch: int


def ves_scan(val_acc_history: Sequence[float], cfg: VesConfig) -> VesOutcome:
    """Stop once validation accuracy has not beaten its running maximum for
    ``patience`` consecutive epochs; report the epoch of that maximum."""
    if len(val_acc_history) == 0:
        raise InvalidInputError("validation history is empty")
    best, best_epoch, since = -np.inf, 0, 0
    for i, acc in enumerate(val_acc_history):
        if acc > best:
            best, best_epoch, since = acc, i + 1, 0
        else:
            since += 1
            if since >= cfg.patience:
                return VesOutcome(Decision.STOP, i + 1, best_epoch)
    return VesOutcome(Decision.CONTINUE, None, best_epoch)


def ves_should_stop(val_acc_history: Sequence[float], cfg: VesConfig) -> Decision:
    return ves_scan(val_acc_history, cfg).decision


def detect_stages(
    loss_history: Sequence[float],
    threshold: float,
    band: float = 0.15,
    window: int = 3,
) -> list[Stage]:
    """Label each epoch fast-learning, gap or memorization.

    Stages only move forward: once the smoothed loss has reached a stage,
    later epochs never return to an earlier one.
    """
    if len(loss_history) == 0:
        raise InvalidInputError("loss history is empty")
    level = 0
    out = []
    for v in smooth(loss_history, window):
        if v < threshold - band:
            current = 2
        elif v <= threshold + band:
            current = 1
        else:
            current = 0
        level = max(level, current)
        out.append(_STAGE_ORDER[level])
    return out
