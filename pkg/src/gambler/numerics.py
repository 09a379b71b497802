"""Numerical primitives shared by the rest of the package.

Everything here works in float64. Logarithms are natural.
"""

from __future__ import annotations

import itertools
import math
from typing import Callable

import numpy as np

from .exceptions import InvalidInputError, InvalidRangeError, UnsupportedDimensionError

#: Bit generator behind every random stream in the package.  Streams are
#: reproducible by third parties as ``numpy.random.Generator(PCG64(seed))``.
RNG_ALGORITHM = "numpy.random.PCG64"

PROB_FLOOR = 1e-12

_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0
_GRID_POINTS = 1024


def make_rng(seed: int) -> np.random.Generator:
    """Return a generator seeded with a 64-bit unsigned ``seed``."""
    if seed < 0 or seed >= 2**64:
        raise InvalidInputError(f"seed must be a 64-bit unsigned integer, got {seed}")
    return np.random.Generator(np.random.PCG64(seed))


def spawn_rngs(seed: int, n: int) -> list[np.random.Generator]:
    """Independent child streams derived from one seed (one per consumer)."""
    children = np.random.SeedSequence(seed).spawn(n)
    return [np.random.Generator(np.random.PCG64(s)) for s in children]


def check_finite(x, name: str = "input") -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{name} contains NaN or Inf")
    return arr


def softmax(logits) -> np.ndarray:
    """Max-shifted softmax over the last axis.

    Accepts a vector or a batch (rows are independent).  Entries equal to
    ``-inf`` are allowed as masks as long as every row keeps one finite entry;
    any NaN or ``+inf`` raises :class:`InvalidInputError`.
    """
    z = np.asarray(logits, dtype=np.float64)
    if z.ndim == 0 or z.shape[-1] < 1:
        raise InvalidInputError("softmax needs at least one logit")
    if np.any(np.isnan(z)) or np.any(z == np.inf):
        raise InvalidInputError("logits must be finite")
    zmax = np.max(z, axis=-1, keepdims=True)
    if not np.all(np.isfinite(zmax)):
        raise InvalidInputError("every row needs at least one finite logit")
    e = np.exp(z - zmax)
    return e / np.sum(e, axis=-1, keepdims=True)


def log_softmax(logits) -> np.ndarray:
    z = np.asarray(logits, dtype=np.float64)
    zmax = np.max(z, axis=-1, keepdims=True)
    shifted = z - zmax
    return shifted - np.log(np.sum(np.exp(shifted), axis=-1, keepdims=True))


def minimize_1d(
    objective: Callable[[float], float],
    lower: float,
    upper: float,
    tol: float = 1e-10,
) -> tuple[float, float]:
    """Global minimizer of a continuous scalar function on ``[lower, upper]``.

    A 1024-point grid scan locates the best cell; golden-section search then
    refines inside the two neighbouring cells until the bracket is narrower
    than ``tol``.  Grid points (endpoints included) stay candidates, so a
    minimum sitting on a boundary is returned exactly.

    Returns
    -------
    (argmin, min)
    """
    if not lower < upper:
        raise InvalidRangeError(f"empty interval [{lower}, {upper}]")
    if not tol > 0:
        raise InvalidInputError("tol must be positive")

    grid = np.linspace(lower, upper, _GRID_POINTS)
    values = np.array([objective(float(x)) for x in grid])
    if np.any(np.isnan(values)):
        raise InvalidInputError("objective returned NaN on the search grid")
    i = int(np.argmin(values))
    best_x, best_f = float(grid[i]), float(values[i])

    a = float(grid[max(i - 1, 0)])
    b = float(grid[min(i + 1, _GRID_POINTS - 1)])
    c = b - _INV_PHI * (b - a)
    d = a + _INV_PHI * (b - a)
    fc, fd = objective(c), objective(d)
    while b - a > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - _INV_PHI * (b - a)
            fc = objective(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INV_PHI * (b - a)
            fd = objective(d)
    for x, fx in ((c, fc), (d, fd)):
        if fx < best_f:
            best_x, best_f = float(x), float(fx)
    mid = 0.5 * (a + b)
    fmid = objective(mid)
    if fmid < best_f:
        best_x, best_f = mid, float(fmid)
    return best_x, best_f


def _simplex_grid(k: int, resolution: int) -> np.ndarray:
    # all compositions of `resolution` into k non-negative parts
    rows = []
    for head in itertools.product(range(resolution + 1), repeat=k - 1):
        s = sum(head)
        if s <= resolution:
            rows.append(head + (resolution - s,))
    return np.asarray(rows, dtype=np.float64) / resolution


def minimize_simplex(
    objective: Callable[[np.ndarray], float],
    k: int,
    resolution: int = 200,
    *,
    vectorized: bool = False,
    tol: float = 1e-12,
) -> tuple[np.ndarray, float]:
    """Brute-force minimizer over the probability simplex of dimension ``k``.

    Every grid point with spacing ``1/resolution`` is evaluated, then a
    coordinate pattern search (moving mass between pairs of slots with a
    halving step) polishes the best grid point.

    With ``vectorized=True`` the objective receives an ``(n, k)`` array and
    must return ``n`` values; refinement still calls it on single rows.
    """
    if k > 4:
        raise UnsupportedDimensionError(f"grid enumeration supports k <= 4, got {k}")
    if k < 1:
        raise InvalidInputError("k must be positive")
    if resolution < 100:
        raise InvalidInputError("resolution must be at least 100")

    points = _simplex_grid(k, resolution)
    if vectorized:
        values = np.asarray(objective(points), dtype=np.float64)
    else:
        values = np.array([objective(p) for p in points])
    values = np.where(np.isnan(values), np.inf, values)
    i = int(np.argmin(values))
    x = points[i].copy()
    fx = float(values[i])

    def f(v):
        if vectorized:
            return float(np.asarray(objective(v[None, :]))[0])
        return float(objective(v))

    step = 1.0 / resolution
    pairs = [(a, b) for a in range(k) for b in range(k) if a != b]
    while step > tol:
        improved = False
        for src, dst in pairs:
            h = min(step, x[src])
            if h <= 0.0:
                continue
            cand = x.copy()
            cand[src] -= h
            cand[dst] += h
            fc = f(cand)
            if fc < fx:
                x, fx, improved = cand, fc, True
        if not improved:
            step *= 0.5
    return x, fx
