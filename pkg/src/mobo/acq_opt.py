"""Global maximization over the unit cube with DIRECT plus a local polish.

The objective is batched: it receives an ``(m, d)`` array of points and
returns ``m`` values.  All points created in one DIRECT iteration are sent
in a single call.

Rectangles are trisected along one longest side (lowest index on ties).
Potentially optimal rectangles are found on the lower-right convex hull of
(half-diagonal, value) pairs with the usual epsilon test.  After DIRECT,
the incumbent is polished by coordinate-wise golden-section search inside
its own rectangle.
"""

from __future__ import annotations

import functools
import heapq
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import ContractError, NumericalError

_GOLD = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class OptBudget:
    max_evals: int = 2000
    max_rects: int | None = None
    local_refine_evals: int = 200

    def __post_init__(self):
        if self.max_evals < 1 or self.local_refine_evals < 0:
            raise ContractError(f"invalid optimizer budget {self}")
        if self.max_rects is not None and self.max_rects < 1:
            raise ContractError(f"invalid optimizer budget {self}")


@dataclass(frozen=True)
class OptResult:
    x_best: np.ndarray
    value_best: float
    evals_used: int


def golden_section_max(f: Callable[[float], float], lo: float, hi: float, iters: int):
    """Golden-section search for a maximum of ``f`` on ``[lo, hi]``.

    Uses ``iters + 2`` evaluations; returns ``(x, f(x))`` of the best probe.
    """
    a, b = lo, hi
    c = b - _GOLD * (b - a)
    d = a + _GOLD * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(iters):
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _GOLD * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLD * (b - a)
            fd = f(d)
    return (c, fc) if fc >= fd else (d, fd)


def pointwise(f: Callable[[np.ndarray], float]) -> Callable[[np.ndarray], np.ndarray]:
    """Adapt a scalar function of one point to the batched calling convention."""

    def batched(X):
        return np.array([f(x) for x in X], dtype=float)

    return batched


class _Evaluator:
    def __init__(self, objective, dim: int):
        self.objective = objective
        self.dim = dim
        self.count = 0
        self.best_x: np.ndarray | None = None
        self.best_f = -math.inf

    def __call__(self, X: np.ndarray) -> np.ndarray:
        vals = np.asarray(self.objective(X), dtype=float).reshape(-1)
        if vals.shape != (len(X),):
            raise ContractError(
                f"objective returned {vals.shape[0]} values for {len(X)} points"
            )
        bad = ~np.isfinite(vals)
        if bad.any():
            i = int(np.argmax(bad))
            raise NumericalError(f"objective value {vals[i]} at point {X[i].tolist()}")
        self.count += len(X)
        i = int(np.argmax(vals))
        if vals[i] > self.best_f:
            self.best_f = float(vals[i])
            self.best_x = X[i].copy()
        return vals


@functools.lru_cache(maxsize=None)
def _size_key(levels: tuple) -> float:
    return 0.5 * math.sqrt(float(np.sum(9.0 ** (-np.array(levels, dtype=float)))))


def _size(levels: np.ndarray) -> float:
    return _size_key(tuple(sorted(int(v) for v in levels)))


def _potentially_optimal(sizes: list[float], vals: list[float], fmin: float, eps: float) -> list[int]:
    """Indices (into the size-sorted lists) chosen for division; minimization form."""
    n = len(sizes)
    best = min(vals)
    j0 = max(i for i in range(n) if vals[i] == best)
    hull: list[int] = []
    for i in range(j0, n):
        while len(hull) >= 2:
            o, a = hull[-2], hull[-1]
            cross = (sizes[a] - sizes[o]) * (vals[i] - vals[o]) - (vals[a] - vals[o]) * (sizes[i] - sizes[o])
            if cross <= 0:
                hull.pop()
            else:
                break
        hull.append(i)
    chosen = []
    threshold = fmin - eps * abs(fmin)
    for p, i in enumerate(hull):
        if p + 1 < len(hull):
            j = hull[p + 1]
            slope = (vals[j] - vals[i]) / (sizes[j] - sizes[i])
            if vals[i] - slope * sizes[i] > threshold:
                continue
        chosen.append(i)
    return chosen


def maximize(objective, dim: int, budget: OptBudget | None = None, eps: float = 1e-4) -> OptResult:
    """Maximize a batched objective over ``[0, 1]^dim``.

    Deterministic for a deterministic objective.  ``evals_used`` never exceeds
    ``budget.max_evals``; ``local_refine_evals`` of them are reserved for the
    final polish (capped at a tenth of the total).
    """
    budget = budget or OptBudget()
    if dim < 1:
        raise ContractError("dimension must be positive")
    refine = min(budget.local_refine_evals, budget.max_evals // 10)
    direct_evals = budget.max_evals - refine
    max_rects = budget.max_rects or math.inf
    ev = _Evaluator(objective, dim)

    centers = [np.full(dim, 0.5)]
    levels = [np.zeros(dim, dtype=int)]
    values = [-ev(centers[0][None, :])[0]]  # stored negated: DIRECT minimizes
    groups: dict[float, list] = {}

    def push(idx: int):
        key = float(f"{_size(levels[idx]):.12e}")
        heapq.heappush(groups.setdefault(key, []), (values[idx], idx))

    push(0)
    while ev.count + 2 <= direct_evals and len(centers) + 2 <= max_rects:
        keys = sorted(k for k, h in groups.items() if h)
        sel = _potentially_optimal(keys, [groups[k][0][0] for k in keys], -ev.best_f, eps)
        room = (direct_evals - ev.count) // 2
        if max_rects is not math.inf:
            room = min(room, (max_rects - len(centers)) // 2)
        sel = sel[:room]
        parents, new_pts = [], []
        for s in sel:
            _, idx = heapq.heappop(groups[keys[s]])
            axis = int(np.argmin(levels[idx]))
            delta = 3.0 ** (-(levels[idx][axis] + 1))
            for sign in (-1.0, 1.0):
                pt = centers[idx].copy()
                pt[axis] += sign * delta
                new_pts.append(pt)
            parents.append((idx, axis))
        vals = ev(np.array(new_pts))
        for p, (idx, axis) in enumerate(parents):
            lev = levels[idx].copy()
            lev[axis] += 1
            levels[idx] = lev
            push(idx)
            for c in (2 * p, 2 * p + 1):
                centers.append(new_pts[c])
                levels.append(lev.copy())
                values.append(-vals[c])
                push(len(centers) - 1)

    # polish inside the incumbent's rectangle
    per_axis = refine // dim
    if per_axis >= 3:
        x = ev.best_x.copy()
        match = [i for i, c in enumerate(centers) if np.array_equal(c, x)]
        half = 0.5 * 3.0 ** (-levels[match[0]].astype(float))
        for axis in range(dim):
            lo = max(0.0, x[axis] - half[axis])
            hi = min(1.0, x[axis] + half[axis])
            base = ev.best_x.copy()

            def along(v, axis=axis, base=base):
                pt = base.copy()
                pt[axis] = v
                return float(ev(pt[None, :])[0])

            golden_section_max(along, lo, hi, per_axis - 2)

    return OptResult(ev.best_x.copy(), ev.best_f, ev.count)
