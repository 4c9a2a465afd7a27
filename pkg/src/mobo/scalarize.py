"""Linear and Tchebychev scalarizations of objective vectors.

Objective values are laid out with the objective index on axis 0, so ``f``
may be a single vector of length K or a ``(K, m)`` block of m candidates.
"""

from __future__ import annotations

import numpy as np

from .errors import ContractError

LINEAR = "linear"
TCHEBYCHEV = "tch"
KINDS = (LINEAR, TCHEBYCHEV)


def check_kind(kind: str) -> str:
    if kind in ("tchebychev", "tchebyshev"):
        return TCHEBYCHEV
    if kind not in KINDS:
        raise ContractError(f"unknown scalarization {kind!r}; expected one of {KINDS}")
    return kind


def validate_weights(lam, tol: float = 1e-9) -> np.ndarray:
    """Return ``lam`` as an array after checking it is a point on the simplex."""
    lam = np.asarray(lam, dtype=float).reshape(-1)
    if lam.size < 1 or not np.all(np.isfinite(lam)):
        raise ContractError(f"invalid weight vector {lam}")
    if np.any(lam < 0) or abs(lam.sum() - 1.0) > tol:
        raise ContractError(f"weights {lam} are not on the simplex")
    return lam


def _aligned(lam, f) -> tuple[np.ndarray, np.ndarray]:
    lam = np.asarray(lam, dtype=float).reshape(-1)
    f = np.asarray(f, dtype=float)
    if f.shape[0] != lam.size:
        raise ContractError(f"{lam.size} weights but {f.shape[0]} objective values")
    return lam.reshape((-1,) + (1,) * (f.ndim - 1)), f


def linear_scalarize(lam, f):
    """``sum_k lam_k f_k``."""
    lam, f = _aligned(lam, f)
    return (lam * f).sum(axis=0)


def tchebychev_scalarize(lam, f, z=None):
    """``min_k lam_k (f_k - z_k)``; the reference point defaults to zero."""
    lam, f = _aligned(lam, f)
    if z is not None:
        z = np.asarray(z, dtype=float).reshape(-1)
        if z.size != lam.size:
            raise ContractError(f"reference point has {z.size} entries, expected {lam.size}")
        f = f - z.reshape(lam.shape)
    return (lam * f).min(axis=0)


def scalarize(kind: str, lam, f, z=None):
    if check_kind(kind) == LINEAR:
        return linear_scalarize(lam, f)
    return tchebychev_scalarize(lam, f, z)


def transform_weights(lam) -> np.ndarray:
    """Normalized pointwise reciprocal of a strictly positive weight vector.

    Maps the weight that picks a slope under the linear scalarization to the
    weight picking the same slope under Tchebychev.  It is an involution on
    the open simplex.
    """
    lam = np.asarray(lam, dtype=float).reshape(-1)
    if lam.size < 1 or np.any(~(lam > 0)):
        raise ContractError(f"reciprocal transform needs strictly positive weights, got {lam}")
    recip = 1.0 / lam
    return recip / recip.sum()
