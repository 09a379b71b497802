"""Per-sample payoff (lambda) scheduling.

Two rules derive a payoff from the model's own prediction ``f``: the
euclidean rule ``(sum f_j)^2 / sum f_j^2`` and the entropic rule
``exp(-sum f_j ln f_j / sum f_j)``, both over class slots only.  The
euclidean rule is the payoff that keeps the gambler's expected single-round
gain at one unit when the gambler's own bets stand in for the label
distribution; the entropic rule instead sets the expected doubling rate to
zero.  They are ordered ``euc <= mid <= exp`` with ``mid = sum f / sum f^2``.

Note that the euclidean rule is scale free in the class slots, so it always
lies in ``[1, m]``.  The entropic rule and ``mid`` scale like
``1 / (1 - f0)`` and may exceed ``m`` when the rejection mass is large;
:func:`schedule_lambda` clamps whatever it returns into ``(1, m]``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import DegeneratePredictionError, InvalidInputError
from .losses import PredictionVector, check_lambda

LAMBDA_MIN_OFFSET = 1e-6


@dataclass(frozen=True)
class LambdaSchedule:
    mode: str = "fixed"
    fixed_value: float | None = None
    warmup_epochs: int = 0

    def __post_init__(self):
        if self.mode not in ("fixed", "euc", "exp"):
            raise InvalidInputError(f"unknown schedule mode {self.mode!r}")
        if self.warmup_epochs < 0:
            raise InvalidInputError("warmup_epochs must be >= 0")
        if self.mode == "fixed":
            if self.fixed_value is None:
                raise InvalidInputError("fixed mode needs fixed_value")
            check_lambda(self.fixed_value)


def _class_mass(pred: PredictionVector) -> np.ndarray:
    f = pred.class_probs
    if not np.sum(f) > 0:
        raise DegeneratePredictionError("all mass on the rejection slot; fall back to lambda = m")
    return f


def lambda_euc(pred: PredictionVector) -> float:
    f = _class_mass(pred)
    return float(np.sum(f) ** 2 / np.sum(f * f))


def _xlogx(f: np.ndarray) -> np.ndarray:
    out = np.zeros_like(f)
    nz = f > 0
    out[nz] = f[nz] * np.log(f[nz])
    return out


def lambda_exp(pred: PredictionVector) -> float:
    f = _class_mass(pred)
    return float(np.exp(-np.sum(_xlogx(f)) / np.sum(f)))


def jensen_ordering(pred: PredictionVector) -> tuple[float, float, float]:
    """``(euc, mid, exp)`` payoffs; ``euc <= mid <= exp`` always holds."""
    f = _class_mass(pred)
    mid = float(np.sum(f) / np.sum(f * f))
    return lambda_euc(pred), mid, lambda_exp(pred)


def batch_lambda(class_probs: np.ndarray, mode: str) -> np.ndarray:
    """Row-wise payoff for an ``(n, m)`` array of class slots.

    Degenerate rows (no class mass) get ``m``.  No clamping here.
    """
    f = np.asarray(class_probs, dtype=np.float64)
    m = f.shape[1]
    total = np.sum(f, axis=1)
    ok = total > 0
    safe_total = np.where(ok, total, 1.0)
    if mode == "euc":
        sq = np.sum(f * f, axis=1)
        lam = total**2 / np.where(ok, sq, 1.0)
    elif mode == "exp":
        lam = np.exp(-np.sum(_xlogx(f), axis=1) / safe_total)
    else:
        raise InvalidInputError(f"no per-sample rule for mode {mode!r}")
    return np.where(ok, lam, float(m))


def schedule_lambda(pred: PredictionVector, sched: LambdaSchedule, epoch: int) -> float:
    """Payoff for one sample at ``epoch`` (0-based) under ``sched``."""
    return float(schedule_batch(pred.class_probs[None, :], sched, epoch)[0])


def schedule_batch(class_probs: np.ndarray, sched: LambdaSchedule, epoch: int) -> np.ndarray:
    f = np.asarray(class_probs, dtype=np.float64)
    n, m = f.shape
    if epoch < sched.warmup_epochs:
        lam = np.full(n, float(m))
    elif sched.mode == "fixed":
        lam = np.full(n, float(sched.fixed_value))
    else:
        lam = batch_lambda(f, sched.mode)
    return np.clip(lam, 1.0 + LAMBDA_MIN_OFFSET, float(m))
