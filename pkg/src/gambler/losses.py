"""Loss functions for a softmax head with an extra rejection slot.

The head has ``m + 1`` outputs.  Slot 0 is the rejection (abstention) score
``f0``; class ``j`` lives in slot ``j + 1``.  All logarithms clamp their
argument at :data:`~gambler.numerics.PROB_FLOOR`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .exceptions import (
    InvalidHyperparameterError,
    InvalidInputError,
    InvalidLabelError,
)
from .numerics import PROB_FLOOR, check_finite, softmax

NORMALIZATION_TOL = 1e-9


class LossKind(str, Enum):
    NLL = "nll"
    GAMBLER = "gambler"
    GAMBLER_SCHED_EUC = "gambler-sched-euc"
    GAMBLER_SCHED_EXP = "gambler-sched-exp"
    LQ = "lq"

    @property
    def uses_rejection(self) -> bool:
        return self not in (LossKind.NLL, LossKind.LQ)


@dataclass(frozen=True)
class PredictionVector:
    """Model output: ``m`` class probabilities plus the rejection mass."""

    class_probs: np.ndarray
    rejection: float = 0.0

    def __post_init__(self):
        probs = np.asarray(self.class_probs, dtype=np.float64)
        object.__setattr__(self, "class_probs", probs)
        object.__setattr__(self, "rejection", float(self.rejection))
        if probs.ndim != 1 or probs.size < 1:
            raise InvalidInputError("class_probs must be a non-empty vector")
        if not np.all(np.isfinite(probs)) or not math.isfinite(self.rejection):
            raise InvalidInputError("prediction must be finite")
        if np.any(probs < 0) or self.rejection < 0:
            raise InvalidInputError("probabilities must be non-negative")
        total = float(np.sum(probs)) + self.rejection
        if abs(total - 1.0) > NORMALIZATION_TOL:
            raise InvalidInputError(f"prediction sums to {total}, expected 1")

    @property
    def num_classes(self) -> int:
        return self.class_probs.size

    @classmethod
    def from_head(cls, head_probs) -> "PredictionVector":
        """Split an ``m + 1`` softmax output (slot 0 = rejection)."""
        head = np.asarray(head_probs, dtype=np.float64)
        return cls(head[1:], float(head[0]))

    @classmethod
    def from_logits(cls, logits) -> "PredictionVector":
        return cls.from_head(softmax(check_finite(logits, "logits")))


@dataclass(frozen=True)
class GamblerConfig:
    lam: float
    num_classes: int
    schedule: str = "fixed"

    def __post_init__(self):
        if self.num_classes < 2:
            raise InvalidInputError("num_classes must be at least 2")
        if self.schedule not in ("fixed", "euc", "exp"):
            raise InvalidInputError(f"unknown schedule {self.schedule!r}")
        if self.schedule == "fixed":
            check_lambda(self.lam, self.num_classes)


def check_lambda(lam: float, num_classes: int | None = None) -> float:
    """Validate the payoff.  ``num_classes=None`` only enforces ``lam > 1``."""
    lam = float(lam)
    if not math.isfinite(lam) or lam <= 1.0:
        raise InvalidHyperparameterError(f"lambda must exceed 1, got {lam}")
    if num_classes is not None and lam > num_classes:
        raise InvalidHyperparameterError(f"lambda must be <= m={num_classes}, got {lam}")
    return lam


def _check_label(label: int, m: int) -> int:
    if not 0 <= int(label) < m or int(label) != label:
        raise InvalidLabelError(f"label {label} outside [0, {m})")
    return int(label)


def nll_loss(pred, label: int) -> float:
    """Negative log-likelihood of ``label`` under a normalized class vector."""
    probs = np.asarray(pred, dtype=np.float64)
    label = _check_label(label, probs.size)
    return -math.log(max(float(probs[label]), PROB_FLOOR))


def gambler_loss(pred: PredictionVector, label: int, lam: float) -> float:
    """``-ln(f_label + f0 / lam)``.

    ``lam`` must exceed 1.  The upper bound ``lam <= m`` belongs to training
    configurations (:class:`GamblerConfig`); the pointwise loss itself is
    well defined for any larger payoff.
    """
    lam = check_lambda(lam)
    label = _check_label(label, pred.num_classes)
    arg = float(pred.class_probs[label]) + pred.rejection / lam
    return -math.log(max(arg, PROB_FLOOR))


def gambler_loss_grad(logits, label: int, lam: float) -> np.ndarray:
    """Gradient of ``gambler_loss(softmax(logits))`` with respect to the logits.

    At points where the log argument is clamped the gradient is zero.
    """
    z = check_finite(logits, "logits")
    if z.ndim != 1 or z.size < 3:
        raise InvalidInputError("logits must be a vector of length m + 1 >= 3")
    lam = check_lambda(lam)
    slot = _check_label(label, z.size - 1) + 1
    s = softmax(z)
    g = s[slot] + s[0] / lam
    if g < PROB_FLOOR:
        return np.zeros_like(s)
    grad = s.copy()
    grad[slot] -= s[slot] / g
    grad[0] -= (s[0] / lam) / g
    return grad


def binary_gambler_point_loss(p: float, p_hat: float, f0: float, lam: float) -> float:
    """Expected gambler's loss of one binary point with smoothed label ``(p, 1-p)``.

    ``p_hat`` is the mass on the (majority) label, ``f0`` the rejection mass,
    and the remainder ``1 - p_hat - f0`` sits on the other class.
    """
    if not 0.0 <= p <= 1.0:
        raise InvalidInputError(f"p must lie in [0, 1], got {p}")
    if p_hat < 0 or f0 < 0 or p_hat + f0 > 1.0 + 1e-12:
        raise InvalidInputError("need p_hat >= 0, f0 >= 0, p_hat + f0 <= 1")
    lam = check_lambda(lam)
    other = max(1.0 - p_hat - f0, 0.0)
    loss = 0.0
    if p > 0:
        loss -= p * math.log(max(p_hat + f0 / lam, PROB_FLOOR))
    if p < 1:
        loss -= (1.0 - p) * math.log(max(other + f0 / lam, PROB_FLOOR))
    return loss


def lq_loss(pred, label: int, q: float = 0.7) -> float:
    """Generalized cross-entropy ``(1 - f_label**q) / q``."""
    if not 0.0 < q <= 1.0:
        raise InvalidHyperparameterError(f"q must lie in (0, 1], got {q}")
    probs = np.asarray(pred, dtype=np.float64)
    label = _check_label(label, probs.size)
    return (1.0 - float(probs[label]) ** q) / q


def head_loss_and_grad(
    logits: np.ndarray,
    labels: np.ndarray,
    kind: LossKind | str,
    lam: np.ndarray | float | None = None,
    *,
    q: float = 0.7,
    mask_rejection: bool = False,
):
    """Batched per-sample losses and logit gradients for an ``m + 1`` head.

    Returns ``(losses, dlogits, probs)`` where ``dlogits[i]`` is the gradient
    of ``losses[i]`` (not of the mean) and ``probs`` is the head softmax.
    ``nll`` and ``lq`` always mask the rejection slot; ``mask_rejection``
    forces the same for the gambler kinds.
    """
    kind = LossKind(kind)
    z = np.array(logits, dtype=np.float64)
    n, width = z.shape
    labels = np.asarray(labels)
    if np.any(labels < 0) or np.any(labels >= width - 1):
        raise InvalidLabelError(f"labels must lie in [0, {width - 1})")
    if mask_rejection or not kind.uses_rejection:
        z[:, 0] = -np.inf
    s = softmax(z)
    rows = np.arange(n)
    slots = labels + 1
    s_y = s[rows, slots]
    grad = s.copy()

    if kind is LossKind.NLL:
        losses = -np.log(np.maximum(s_y, PROB_FLOOR))
        grad[rows, slots] -= 1.0
    elif kind is LossKind.LQ:
        if not 0.0 < q <= 1.0:
            raise InvalidHyperparameterError(f"q must lie in (0, 1], got {q}")
        sq = s_y**q
        losses = (1.0 - sq) / q
        grad *= sq[:, None]
        grad[rows, slots] -= sq
    else:
        lam = np.broadcast_to(np.asarray(lam, dtype=np.float64), (n,))
        if np.any(~np.isfinite(lam)) or np.any(lam <= 1.0):
            raise InvalidHyperparameterError("lambda must exceed 1")
        reject = s[:, 0] / lam
        g = s_y + reject
        clamped = g < PROB_FLOOR
        losses = -np.log(np.maximum(g, PROB_FLOOR))
        safe_g = np.where(clamped, 1.0, g)
        grad[rows, slots] -= s_y / safe_g
        grad[:, 0] -= reject / safe_g
        grad[clamped] = 0.0
    return losses, grad, s
