"""Closed-form results for binary classification under symmetric label noise.

Notation: ``p`` is the smoothed probability of a point's majority label,
``a = 1 - r`` the clean rate, ``lam`` the gambler payoff.  Every formula has a
brute-force counterpart in :mod:`gambler.harness.verify`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .exceptions import DivergenceError, InvalidInputError, LearnabilityError
from .losses import check_lambda


def _xlogx(x: float) -> float:
    return x * math.log(x) if x > 0 else 0.0


def entropy(p: float) -> float:
    """Binary entropy in nats, with ``0 ln 0 = 0``."""
    if not 0.0 <= p <= 1.0:
        raise InvalidInputError(f"p must lie in [0, 1], got {p}")
    return -_xlogx(p) - _xlogx(1.0 - p)


@dataclass(frozen=True)
class TheoryPoint:
    p: float
    a: float
    lam: float

    def __post_init__(self):
        if not 0.5 < self.p <= 1.0:
            raise InvalidInputError("p must lie in (0.5, 1]")
        if not 0.5 < self.a <= 1.0:
            raise InvalidInputError("a must lie in (0.5, 1]")
        check_lambda(self.lam)


@dataclass(frozen=True)
class PlateauEstimate:
    threshold: float
    clean_rate: float
    lam: float


def generalization_error(q_pred: float, p: float, a: float) -> float:
    """Expected cross-entropy of predicting ``q_pred`` on a smoothed label ``(p, 1-p)``
    that is flipped with probability ``1 - a``."""
    if not 0.0 < q_pred < 1.0:
        raise DivergenceError(f"q_pred={q_pred} makes the log diverge")
    lq, l1q = math.log(q_pred), math.log(1.0 - q_pred)
    return -a * (p * lq + (1.0 - p) * l1q) - (1.0 - a) * (p * l1q + (1.0 - p) * lq)


def is_learnable(p: float, lam: float) -> bool:
    """True when the gambler's optimum puts mass on a class (``lam >= 1/p``).

    The boundary ``lam == 1/p`` counts as learnable; the optimum there has
    zero class mass and joins the abstaining solution continuously.
    """
    if not 0.5 < p <= 1.0:
        raise InvalidInputError("p must lie in (0.5, 1]")
    check_lambda(lam)
    return lam >= 1.0 / p


def optimal_prediction(p: float, lam: float) -> tuple[float, float]:
    """Optimal ``(class mass, rejection mass)`` for a learnable point.

    Wrong classes receive zero mass.  Unlearnable points raise
    :class:`LearnabilityError`; their optimum is full abstention.
    """
    if not is_learnable(p, lam):
        raise LearnabilityError(f"lam={lam} < 1/p={1.0 / p:.6g}: optimum abstains (f0 = 1)")
    # (p lam - 1)/(lam - 1) cancels badly near lam = 1; 1 - f0 does not
    f0 = min(lam * (1.0 - p) / (lam - 1.0), 1.0)
    return 1.0 - f0, f0


def complexity_bound(lam: float) -> float:
    """Largest per-point prediction entropy among points learnable at ``lam``."""
    check_lambda(lam)
    return entropy(1.0 / lam)


def generalization_gap(a: float, lam: float) -> float:
    """Limit ``p -> 1`` of the generalization error lost by plain cross-entropy
    relative to the gambler's optimum: ``(1 - a) ln(lam / (lam - 1))``."""
    if not 0.0 <= a <= 1.0:
        raise InvalidInputError("a must lie in [0, 1]")
    check_lambda(lam)
    return (1.0 - a) * math.log(lam / (lam - 1.0))


def perturbative_gap(p: float, a: float, lam: float) -> float:
    """First-order proxy ``(1 - a) p / (lam - 1)`` for the gap at finite ``p``.

    Intended for ``p >= 0.99`` and large ``lam``: its relative distance to
    the exact finite-``p`` gap shrinks like ``1 / (2 lam)``.
    """
    check_lambda(lam)
    return (1.0 - a) * p / (lam - 1.0)


def mean_field_loss(p_hat: float, a: float, lam: float) -> float:
    """Training loss when a fraction ``a`` of labels is clean and the model puts
    ``p_hat`` on the clean label and the rest on rejection."""
    loss = -a * math.log(max(p_hat + (1.0 - p_hat) / lam, 1e-300))
    if a < 1.0:
        loss -= (1.0 - a) * math.log(max((1.0 - p_hat) / lam, 1e-300))
    return loss


def plateau_threshold(a: float, lam: float) -> PlateauEstimate:
    """Height of the training-loss plateau, ``H(a) + (1 - a) ln(lam - 1)``.

    This is the minimum of :func:`mean_field_loss` whenever ``lam >= 1/a``.
    """
    if not 0.5 <= a <= 1.0:
        raise InvalidInputError(f"a must lie in [0.5, 1], got {a}")
    check_lambda(lam)
    threshold = entropy(a) + (1.0 - a) * math.log(lam - 1.0)
    return PlateauEstimate(threshold, a, lam)
