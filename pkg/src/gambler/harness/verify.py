"""Brute-force checks of every closed form in :mod:`gambler.theory`.

Each check compares an analytic formula against a numerical optimum (grid
plus golden-section or simplex pattern search) and records the largest
deviation seen.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from ..losses import PredictionVector, binary_gambler_point_loss
from ..numerics import make_rng, minimize_1d, minimize_simplex
from ..schedule import jensen_ordering
from ..theory import (
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

REPORT_VERSION = 1
PLATEAU_SPOT = (0.5, 9.99, 1.791203)


@dataclass
class CheckResult:
    name: str
    passed: bool
    max_error: float
    tolerance: float
    cases: int
    seconds: float
    detail: str = ""

    def __post_init__(self):
        self.passed = bool(self.passed)
        self.max_error = float(self.max_error)
        self.tolerance = float(self.tolerance)


@dataclass
class VerifyReport:
    version: int
    passed: bool
    checks: list[CheckResult] = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "VerifyReport":
        return cls(d["version"], d["passed"], [CheckResult(**c) for c in d["checks"]])

    @classmethod
    def from_json(cls, text: str) -> "VerifyReport":
        return cls.from_dict(json.loads(text))

    def failed(self) -> list[str]:
        return [c.name for c in self.checks if not c.passed]


def _default_plateau(a: float, lam: float) -> float:
    return plateau_threshold(a, lam).threshold


def _binary_point_objective(p: float, lam: float):
    def f(v):
        # v rows: (rejection, majority class, other class)
        g1 = np.maximum(v[:, 1] + v[:, 0] / lam, 1e-300)
        g2 = np.maximum(v[:, 2] + v[:, 0] / lam, 1e-300)
        return -p * np.log(g1) - (1.0 - p) * np.log(g2)

    return f


def check_optimal_prediction(rng, n=200) -> CheckResult:
    """Optimal class mass of a learnable point, against a 1-d search with f0 = 1 - p_hat."""
    worst = 0.0
    for _ in range(n):
        p = rng.uniform(0.5 + 1e-3, 1.0)
        lam = rng.uniform(1.0 / p, 2.0)
        p_star, f0_star = optimal_prediction(p, lam)
        x, _ = minimize_1d(lambda ph: binary_gambler_point_loss(p, ph, 1.0 - ph, lam), 0.0, 1.0, tol=1e-12)
        worst = max(worst, abs(x - p_star), abs(p_star + f0_star - 1.0))
    return CheckResult("optimal_prediction", worst < 1e-6, worst, 1e-6, n, 0.0)


def check_other_class_zero(rng, n=50) -> CheckResult:
    """The wrong class receives no mass at the optimum (simplex search)."""
    worst = 0.0
    for _ in range(n):
        p = rng.uniform(0.55, 1.0)
        lam = rng.uniform(1.0 / p, 2.0)
        v, _ = minimize_simplex(_binary_point_objective(p, lam), 3, vectorized=True)
        worst = max(worst, float(v[2]))
    return CheckResult("other_class_zero", worst < 1e-6, worst, 1e-6, n, 0.0)


def check_trivial_solution(rng, n=200, resolution=200) -> CheckResult:
    """Unlearnable points: the simplex optimum abstains and the loss is ln(lam)."""
    worst_loss, worst_reject = 0.0, 0.0
    for _ in range(n):
        p = rng.uniform(0.5 + 1e-3, 1.0 - 1e-3)
        lam = rng.uniform(1.0 + 1e-6, 1.0 / p)
        v, fmin = minimize_simplex(_binary_point_objective(p, lam), 3, resolution, vectorized=True)
        worst_loss = max(worst_loss, abs(fmin - math.log(lam)))
        worst_reject = max(worst_reject, 1.0 - float(v[0]))
    ok = worst_loss < 1e-6 and worst_reject < 0.01
    return CheckResult("trivial_solution", ok, worst_loss, 1e-6, n, 0.0,
                       f"largest non-rejected mass {worst_reject:.3g} (limit 0.01)")


def check_gap_limit(grid=10) -> CheckResult:
    """Gap between predicting p and predicting p* tends to (1-a) ln(lam/(lam-1)) as p -> 1."""
    p = 1.0 - 1e-6
    worst = 0.0
    for a in np.linspace(0.55, 1.0, grid):
        for lam in np.linspace(1.1, 10.0, grid):
            p_star, _ = optimal_prediction(p, lam)
            exact = generalization_error(p, p, a) - generalization_error(p_star, p, a)
            worst = max(worst, abs(exact - generalization_gap(a, lam)))
    exact_zero = all(generalization_gap(1.0, lam) == 0.0 for lam in np.linspace(1.1, 10.0, grid))
    positive = all(generalization_gap(a, lam) > 0 for a in np.linspace(0.55, 0.99, grid)
                   for lam in np.linspace(1.1, 10.0, grid))
    ok = worst < 1e-3 and exact_zero and positive
    return CheckResult("gap_limit", ok, worst, 1e-3, grid * grid, 0.0,
                       f"zero at a=1: {exact_zero}; positive below a=1: {positive}")


def check_plateau(plateau_fn, grid=20) -> CheckResult:
    """Plateau formula against the numerical minimum of the mean-field loss."""
    worst = 0.0
    for a in np.linspace(0.5, 0.95, grid):
        for lam in np.linspace(2.0, 10.0, grid):
            _, fmin = minimize_1d(lambda ph: mean_field_loss(ph, a, lam), 0.0, 1.0, tol=1e-12)
            worst = max(worst, abs(plateau_fn(a, lam) - fmin))
    return CheckResult("plateau", worst < 1e-8, worst, 1e-8, grid * grid, 0.0)


def check_plateau_spot(plateau_fn) -> CheckResult:
    a, lam, expected = PLATEAU_SPOT
    err = abs(plateau_fn(a, lam) - expected)
    return CheckResult("plateau_spot_value", err <= 1e-6, err, 1e-6, 1, 0.0, f"a={a}, lam={lam}")


def check_complexity_bound(rng, n=200) -> CheckResult:
    """Learnable points have effective prediction entropy at most H(1/lam), attained at p = 1/lam."""
    worst = 0.0
    for _ in range(n):
        lam = rng.uniform(1.0 + 1e-3, 2.0)
        p = rng.uniform(1.0 / lam, 1.0)
        x, _ = minimize_1d(lambda ph: binary_gambler_point_loss(p, ph, 1.0 - ph, lam), 0.0, 1.0, tol=1e-12)
        effective = min(x + (1.0 - x) / lam, 1.0)
        worst = max(worst, entropy(effective) - complexity_bound(lam))
        # the bound is tight: the boundary point's entropy equals it
        worst = max(worst, abs(entropy(1.0 / lam) - complexity_bound(lam)))
    return CheckResult("complexity_bound", worst <= 1e-9, max(worst, 0.0), 1e-9, n, 0.0)


def check_perturbative_gap(grid=8) -> CheckResult:
    """Perturbative gap vs exact finite-p gap: relative error times lam stays below 1."""
    worst = 0.0
    for p in (0.99, 0.995, 0.999, 1.0 - 1e-6):
        for a in np.linspace(0.55, 0.95, grid):
            for lam in np.geomspace(10.0, 1000.0, grid):
                p_star, _ = optimal_prediction(p, lam)
                exact = generalization_error(p, p, a) - generalization_error(p_star, p, a)
                worst = max(worst, abs(perturbative_gap(p, a, lam) - exact) / exact * lam)
    return CheckResult("perturbative_gap", worst < 1.0, worst, 1.0, 4 * grid * grid, 0.0,
                       "max of lam * relative error, p >= 0.99, lam in [10, 1000]")


def check_learnability_boundary(rng, n=100) -> CheckResult:
    flips_bad = 0
    for _ in range(n):
        p = rng.uniform(0.51, 0.999)
        lams = np.linspace(1.0 + 1e-6, 2.0 * (1.0 / p), 401)
        flags = [is_learnable(p, lam) for lam in lams] + [is_learnable(p, 1.0 / p)]
        flips = sum(1 for u, v in zip(flags[:-2], flags[1:-1]) if u != v)
        if flips != 1 or not flags[-1]:
            flips_bad += 1
    return CheckResult("learnability_boundary", flips_bad == 0, float(flips_bad), 0.0, n, 0.0)


def check_jensen(rng, n=10_000) -> CheckResult:
    """euc <= mid <= exp; violations measured relative to the payoff scale."""
    worst = 0.0
    for _ in range(n):
        m = int(rng.integers(2, 11))
        head = rng.dirichlet(np.full(m + 1, rng.uniform(0.1, 3.0)))
        if head[1:].sum() <= 0:
            continue
        euc, mid, exp = jensen_ordering(PredictionVector.from_head(head))
        worst = max(worst, (euc - mid) / mid, (mid - exp) / exp)
    return CheckResult("jensen_ordering", worst <= 1e-12, max(worst, 0.0), 1e-12, n, 0.0)


def run_verify_theory(
    plateau_fn: Callable[[float, float], float] | None = None,
    seed: int = 20190529,
) -> VerifyReport:
    """Run every check; ``plateau_fn`` lets tests inject a tampered formula."""
    plateau_fn = plateau_fn or _default_plateau
    rng = make_rng(seed)
    jobs = [
        lambda: check_trivial_solution(rng),
        lambda: check_optimal_prediction(rng),
        lambda: check_other_class_zero(rng),
        lambda: check_gap_limit(),
        lambda: check_plateau(plateau_fn),
        lambda: check_plateau_spot(plateau_fn),
        lambda: check_complexity_bound(rng),
        lambda: check_perturbative_gap(),
        lambda: check_learnability_boundary(rng),
        lambda: check_jensen(rng),
    ]
    checks = []
    for job in jobs:
        t0 = time.perf_counter()
        result = job()
        result.seconds = time.perf_counter() - t0
        checks.append(result)
    return VerifyReport(REPORT_VERSION, all(c.passed for c in checks), checks)
