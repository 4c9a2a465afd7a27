"""Preference distributions over the simplex.

Each distribution is a small immutable object with ``sample(rng)``; the JSON
form used in experiment configs is a tagged record, e.g.
``{"kind": "bounding_box", "boxes": [[0.2, 0.4], [0.6, 0.9]]}``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .scalarize import LINEAR, check_kind, transform_weights

log = logging.getLogger(__name__)

MIN_WEIGHT = 1e-6


def clamp_min_weight(lam, floor: float = MIN_WEIGHT) -> np.ndarray:
    """Raise every coordinate to at least ``floor`` keeping the sum at one.

    Coordinates already above the floor are shrunk proportionally.  Vectors
    that already satisfy the constraint are returned unchanged.
    """
    lam = np.asarray(lam, dtype=float)
    total = lam.sum()
    if np.all(lam >= floor) and abs(total - 1.0) <= 1e-12:
        return lam
    lam = lam / total
    fixed = lam < floor
    while True:
        free = ~fixed
        out = np.where(fixed, floor, lam * (1.0 - floor * fixed.sum()) / lam[free].sum())
        newly = free & (out < floor)
        if not newly.any():
            return out
        fixed |= newly


@dataclass(frozen=True)
class BoundingBox:
    """``lam = u / |u|_1`` with ``u_k ~ Unif[a_k, b_k]`` (normalized objective units)."""

    boxes: tuple[tuple[float, float], ...]

    def __post_init__(self):
        boxes = []
        for box in self.boxes:
            a, b = (float(v) for v in box)
            if a > b:
                raise ConfigError(f"bounding box [{a}, {b}] has a > b")
            if a < 0:
                log.warning("bounding box [%g, %g] clamped to nonnegative values", a, b)
                a, b = 0.0, max(b, 0.0)
            boxes.append((a, b))
        if not boxes:
            raise ConfigError("bounding box needs at least one interval")
        object.__setattr__(self, "boxes", tuple(boxes))

    @property
    def K(self) -> int:
        return len(self.boxes)

    def sample(self, rng) -> np.ndarray:
        lo, hi = np.array(self.boxes).T
        u = rng.uniform(lo, hi)
        if u.sum() <= 0:
            raise ConfigError("bounding box draw is all zeros; boxes cannot all be [0, 0]")
        return clamp_min_weight(u / u.sum())

    def center(self) -> np.ndarray:
        c = np.array(self.boxes).mean(axis=1)
        if c.sum() <= 0:
            raise ConfigError("bounding box center is all zeros")
        return clamp_min_weight(c / c.sum())

    def to_dict(self) -> dict:
        return {"kind": "bounding_box", "boxes": [list(b) for b in self.boxes]}


@dataclass(frozen=True)
class FlatDirichlet:
    K: int

    def sample(self, rng) -> np.ndarray:
        return clamp_min_weight(rng.dirichlet(np.ones(self.K)))

    def center(self) -> np.ndarray:
        return np.full(self.K, 1.0 / self.K)

    def to_dict(self) -> dict:
        return {"kind": "flat_dirichlet", "K": self.K}


@dataclass(frozen=True)
class SphereUniform:
    """``lam = |w| / |w|_1`` with ``w`` standard normal."""

    K: int

    def sample(self, rng) -> np.ndarray:
        w = np.abs(rng.standard_normal(self.K))
        return clamp_min_weight(w / w.sum())

    def center(self) -> np.ndarray:
        return np.full(self.K, 1.0 / self.K)

    def to_dict(self) -> dict:
        return {"kind": "sphere_uniform", "K": self.K}


@dataclass(frozen=True)
class Fixed:
    weights: tuple[float, ...]

    def __post_init__(self):
        lam = np.asarray(self.weights, dtype=float).reshape(-1)
        if lam.size < 1 or np.any(lam < 0) or abs(lam.sum() - 1.0) > 1e-9:
            raise ConfigError(f"fixed weights {lam.tolist()} are not on the simplex")
        object.__setattr__(self, "weights", tuple(float(v) for v in lam))

    @property
    def K(self) -> int:
        return len(self.weights)

    def sample(self, rng) -> np.ndarray:
        return clamp_min_weight(np.array(self.weights))

    def center(self) -> np.ndarray:
        return self.sample(None)

    def to_dict(self) -> dict:
        return {"kind": "fixed", "lambda": list(self.weights)}


@dataclass(frozen=True)
class RatioUniform:
    """Two objectives: ``u ~ Unif(lo, hi)``, coordinate ``index`` gets ``u/(u+1)``."""

    lo: float
    hi: float
    index: int = 0

    def __post_init__(self):
        if not 0 <= self.lo < self.hi:
            raise ConfigError(f"ratio distribution needs 0 <= lo < hi, got ({self.lo}, {self.hi})")
        if self.index not in (0, 1):
            raise ConfigError("ratio distribution index must be 0 or 1")

    K = 2

    def _vector(self, u: float) -> np.ndarray:
        lam = np.empty(2)
        lam[self.index] = u / (u + 1.0)
        lam[1 - self.index] = 1.0 / (u + 1.0)
        return clamp_min_weight(lam)

    def sample(self, rng) -> np.ndarray:
        return self._vector(rng.uniform(self.lo, self.hi))

    def center(self) -> np.ndarray:
        return self._vector(0.5 * (self.lo + self.hi))

    def to_dict(self) -> dict:
        return {"kind": "ratio_uniform", "lo": self.lo, "hi": self.hi, "index": self.index}


WeightDistribution = BoundingBox | FlatDirichlet | SphereUniform | Fixed | RatioUniform


def from_spec(spec: dict) -> WeightDistribution:
    """Build a distribution from its tagged-record form."""
    if not isinstance(spec, dict) or "kind" not in spec:
        raise ConfigError(f"weight distribution must be a record with a 'kind' field: {spec!r}")
    kind = spec["kind"]
    try:
        if kind == "bounding_box":
            return BoundingBox(tuple(tuple(b) for b in spec["boxes"]))
        if kind == "flat_dirichlet":
            return FlatDirichlet(int(spec["K"]))
        if kind == "sphere_uniform":
            return SphereUniform(int(spec["K"]))
        if kind == "fixed":
            return Fixed(tuple(spec["lambda"]))
        if kind == "ratio_uniform":
            return RatioUniform(float(spec["lo"]), float(spec["hi"]), int(spec.get("index", 0)))
    except KeyError as exc:
        raise ConfigError(f"weight distribution {kind!r} is missing field {exc.args[0]!r}") from None
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad weight distribution {spec!r}: {exc}") from None
    raise ConfigError(f"unknown weight distribution kind {kind!r}")


def sample_weight(dist: WeightDistribution, rng) -> np.ndarray:
    return dist.sample(np.random.default_rng(rng))


def weights_for_scalarization(dist: WeightDistribution, kind: str, rng) -> np.ndarray:
    """Draw a preference weight, reciprocal-transformed for Tchebychev."""
    lam = sample_weight(dist, rng)
    if check_kind(kind) == LINEAR:
        return lam
    return transform_weights(lam)
