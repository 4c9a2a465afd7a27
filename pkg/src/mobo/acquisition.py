"""Scalarized Thompson-sampling and UCB acquisitions for K objectives.

``means`` and ``stds`` are stacked with the objective on axis 0, either as
length-K vectors or as ``(K, m)`` blocks for m candidate points.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import ContractError
from .scalarize import LINEAR, TCHEBYCHEV, check_kind, scalarize


@dataclass(frozen=True)
class BetaSchedule:
    """``beta_t = coefficient * ln(2t + 1)``."""

    coefficient: float = 0.125

    def __post_init__(self):
        if not self.coefficient > 0:
            raise ContractError("beta coefficient must be positive")

    def __call__(self, t: int) -> float:
        return beta_value(self, t)


def beta_value(schedule: BetaSchedule, t: int) -> float:
    if t < 1:
        raise ContractError(f"beta_t is defined for t >= 1, got {t}")
    return schedule.coefficient * math.log(2 * t + 1)


@dataclass(frozen=True)
class AcquisitionSpec:
    method: str  # "ts" | "ucb" | "random"
    scalarization: str = LINEAR
    beta: BetaSchedule = BetaSchedule()
    reference: tuple[float, ...] | None = None
    n_features: int = 512

    def __post_init__(self):
        if self.method not in ("ts", "ucb", "random"):
            raise ContractError(f"unknown acquisition method {self.method!r}")
        object.__setattr__(self, "scalarization", check_kind(self.scalarization))


def _stack(values, K: int) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.shape[0] != K:
        raise ContractError(f"expected {K} objectives, got {arr.shape[0]}")
    return arr


def ucb_linear(lam, means, stds, beta: float):
    """``sum lam_k mu_k + sqrt(beta) * sqrt(sum lam_k^2 sigma_k^2)``."""
    lam = np.asarray(lam, dtype=float).reshape(-1)
    means, stds = _stack(means, lam.size), _stack(stds, lam.size)
    if beta < 0:
        raise ContractError("beta must be nonnegative")
    lam_b = lam.reshape((-1,) + (1,) * (means.ndim - 1))
    spread = np.sqrt(((lam_b * lam_b) * (stds * stds)).sum(axis=0))
    return (lam_b * means).sum(axis=0) + math.sqrt(beta) * spread


def ucb_tchebychev(lam, means, stds, beta: float, z=None):
    """``min_k lam_k (mu_k + sqrt(beta) sigma_k - z_k)``."""
    lam = np.asarray(lam, dtype=float).reshape(-1)
    means, stds = _stack(means, lam.size), _stack(stds, lam.size)
    if beta < 0:
        raise ContractError("beta must be nonnegative")
    return scalarize(TCHEBYCHEV, lam, means + math.sqrt(beta) * stds, z)


def ts_acquisition(lam, draws: Sequence[Callable], kind: str, z, X):
    """Scalarization of one posterior function draw per objective, at rows of ``X``."""
    lam = np.asarray(lam, dtype=float).reshape(-1)
    if len(draws) != lam.size:
        raise ContractError(f"{lam.size} weights but {len(draws)} function draws")
    values = np.stack([np.asarray(d(X), dtype=float).reshape(-1) for d in draws])
    return scalarize(kind, lam, values, z)
