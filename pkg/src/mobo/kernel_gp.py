"""Squared-exponential Gaussian-process regression for a single objective.

The model keeps the raw observations, subtracts their median before
inference and adds it back on every query.  All linear algebra goes through
one Cholesky factor of ``K + (noise_var + jitter) I``.

Function draws for Thompson sampling are built from random Fourier features
of the SE kernel and conditioned on the data with Matheron's rule in weight
space, so a draw can be evaluated anywhere in the unit cube.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import LinAlgError, cho_solve, cholesky, solve_triangular

from .acq_opt import golden_section_max
from .errors import ContractError, NumericalError

VAR_FLOOR = 1e-12
# jitter multipliers (times the signal scale); the exact matrix is tried first
JITTER_LADDER = (0.0, 1e-6, 1e-5, 1e-4, 1e-3)
# smallest pivot (relative to scale) accepted for an unjittered factor
MIN_PIVOT = 1e-10
LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class KernelParams:
    """Hyperparameters of one objective's SE kernel."""

    scale: float
    bandwidths: tuple[float, ...]
    noise_var: float = 0.0

    def __post_init__(self):
        bw = tuple(float(b) for b in np.atleast_1d(self.bandwidths))
        object.__setattr__(self, "bandwidths", bw)
        object.__setattr__(self, "scale", float(self.scale))
        object.__setattr__(self, "noise_var", float(self.noise_var))
        values = (self.scale, self.noise_var) + bw
        if not all(math.isfinite(v) for v in values):
            raise ContractError(f"kernel parameters must be finite: {self}")
        if self.scale <= 0 or min(bw, default=0.0) <= 0 or self.noise_var < 0:
            raise ContractError(f"invalid kernel parameters: {self}")

    @property
    def dim(self) -> int:
        return len(self.bandwidths)

    @property
    def bw(self) -> np.ndarray:
        return np.asarray(self.bandwidths)

    def to_dict(self) -> dict:
        return {
            "scale": self.scale,
            "bandwidths": list(self.bandwidths),
            "noise_var": self.noise_var,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "KernelParams":
        return cls(data["scale"], tuple(data["bandwidths"]), data["noise_var"])


@dataclass(frozen=True)
class PosteriorSummary:
    mean: float
    std: float


def _as_points(x, dim: int) -> np.ndarray:
    arr = np.atleast_2d(np.asarray(x, dtype=float))
    if arr.shape[-1] != dim:
        raise ContractError(f"expected points of dimension {dim}, got shape {arr.shape}")
    return arr


def kernel_matrix(params: KernelParams, X1, X2) -> np.ndarray:
    """Gram block ``[k(a, b)]`` for rows ``a`` of ``X1`` and ``b`` of ``X2``."""
    A = _as_points(X1, params.dim) / params.bw
    B = _as_points(X2, params.dim) / params.bw
    sq = ((A[:, None, :] - B[None, :, :]) ** 2).sum(axis=-1)
    return params.scale * np.exp(-0.5 * sq)


def kernel_eval(params: KernelParams, x1, x2) -> float:
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    if x1.shape != (params.dim,) or x2.shape != (params.dim,):
        raise ContractError(
            f"points must have shape ({params.dim},), got {x1.shape} and {x2.shape}"
        )
    return float(kernel_matrix(params, x1, x2)[0, 0])


def robust_cholesky(A: np.ndarray, scale: float) -> tuple[np.ndarray, float]:
    """Lower Cholesky factor of ``A + jitter I`` with the smallest jitter that works.

    Returns ``(L, jitter)``.  Raises ``NumericalError`` past ``1e-3 * scale``.
    """
    eye = np.eye(A.shape[0])
    for mult in JITTER_LADDER:
        jitter = mult * scale
        try:
            L = cholesky(A + jitter * eye, lower=True, check_finite=False)
        except LinAlgError:
            continue
        diag = np.diag(L)
        if not np.all(np.isfinite(diag)):
            continue
        if mult == 0.0 and diag.size and np.min(diag) ** 2 < MIN_PIVOT * scale:
            continue
        return L, jitter
    raise NumericalError(
        f"matrix of size {A.shape[0]} not positive definite at jitter {JITTER_LADDER[-1] * scale:g}"
    )


@dataclass(frozen=True, eq=False)
class GPModel:
    """A fitted (possibly empty) GP surrogate for one objective.

    Immutable; ``predict`` is safe to call concurrently.
    """

    params: KernelParams
    inputs: np.ndarray
    targets: np.ndarray
    mean_offset: float = 0.0
    factor: np.ndarray | None = None
    alpha: np.ndarray | None = None
    jitter: float = 0.0

    @property
    def n(self) -> int:
        return len(self.targets)

    def predict(self, X) -> tuple[np.ndarray, np.ndarray]:
        """Posterior mean and standard deviation at each row of ``X``."""
        X = _as_points(X, self.params.dim)
        if self.factor is None:
            mean = np.full(len(X), self.mean_offset)
            std = np.full(len(X), math.sqrt(self.params.scale))
            return mean, std
        k = kernel_matrix(self.params, X, self.inputs)
        mean = self.mean_offset + k @ self.alpha
        v = solve_triangular(self.factor, k.T, lower=True, check_finite=False)
        var = self.params.scale - np.einsum("ij,ij->j", v, v)
        return mean, np.sqrt(np.maximum(var, VAR_FLOOR))


def fit_factorization(params: KernelParams, inputs, targets) -> GPModel:
    """Condition the GP prior on ``(inputs, targets)`` under fixed hyperparameters."""
    targets = np.asarray(targets, dtype=float).reshape(-1)
    if len(targets) == 0:
        return GPModel(params, np.empty((0, params.dim)), targets)
    X = _as_points(inputs, params.dim)
    if len(X) != len(targets):
        raise ContractError(f"{len(X)} inputs but {len(targets)} targets")
    if np.any(X < 0.0) or np.any(X > 1.0):
        raise ContractError("inputs must lie in the unit cube")
    offset = float(np.median(targets))
    K = kernel_matrix(params, X, X)
    K[np.diag_indices_from(K)] += params.noise_var
    L, jitter = robust_cholesky(K, params.scale)
    alpha = cho_solve((L, True), targets - offset, check_finite=False)
    return GPModel(params, X.copy(), targets.copy(), offset, L, alpha, jitter)


def posterior(model: GPModel, x) -> PosteriorSummary:
    mean, std = model.predict(x)
    if len(mean) != 1:
        raise ContractError("posterior() takes a single point; use GPModel.predict for batches")
    return PosteriorSummary(float(mean[0]), float(std[0]))


def log_marginal_likelihood(params: KernelParams, inputs, targets) -> float:
    """Gaussian log evidence of median-centred targets."""
    targets = np.asarray(targets, dtype=float).reshape(-1)
    if len(targets) == 0:
        raise ContractError("log marginal likelihood needs at least one observation")
    model = fit_factorization(params, inputs, targets)
    resid = targets - model.mean_offset
    return float(
        -0.5 * resid @ model.alpha
        - np.log(np.diag(model.factor)).sum()
        - 0.5 * len(targets) * LOG_2PI
    )


# ---------------------------------------------------------------------------
# Function draws
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SpectralSample:
    """One GP function draw: ``offset + sum_j amp_j cos(w_j . x + phase_j)``."""

    frequencies: np.ndarray
    phases: np.ndarray
    amplitudes: np.ndarray
    offset: float = 0.0

    def __call__(self, X) -> np.ndarray:
        X = _as_points(X, self.frequencies.shape[1])
        return self.offset + np.cos(X @ self.frequencies.T + self.phases) @ self.amplitudes


def draw_spectral_sample(model: GPModel, M: int = 512, rng=None) -> SpectralSample:
    """Approximate posterior draw from ``M`` random Fourier features.

    The prior weights are standard normal; conditioning uses Matheron's rule,
    ``theta = theta0 + Phi^T (Phi Phi^T + s2 I)^{-1} (y - Phi theta0 - eps)``,
    which is exact for the finite-feature model.
    """
    if M < 1:
        raise ContractError("need at least one feature")
    rng = np.random.default_rng(rng)
    p = model.params
    W = rng.standard_normal((M, p.dim)) / p.bw
    b = rng.uniform(0.0, 2.0 * math.pi, M)
    theta = rng.standard_normal(M)
    coef = math.sqrt(2.0 * p.scale / M)
    if model.n:
        Phi = coef * np.cos(model.inputs @ W.T + b)
        noise = p.noise_var + model.jitter
        G = Phi @ Phi.T
        G[np.diag_indices_from(G)] += noise
        L, extra = robust_cholesky(G, p.scale)
        eps = math.sqrt(noise + extra) * rng.standard_normal(model.n)
        resid = model.targets - model.mean_offset - Phi @ theta - eps
        theta = theta + Phi.T @ cho_solve((L, True), resid, check_finite=False)
    return SpectralSample(W, b, coef * theta, model.mean_offset)


# ---------------------------------------------------------------------------
# Hyperparameter fitting
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class HyperBounds:
    """Box constraints for marginal-likelihood fitting (linear units)."""

    scale: tuple[float, float] = (1e-3, 100.0)
    bandwidth: tuple[float, float] = (0.01, 10.0)
    noise_var: tuple[float, float] = (1e-6, 1.0)

    def scaled(self, target_var: float) -> "HyperBounds":
        """Bounds for targets of variance ``target_var`` (scale and noise stretched)."""
        v = float(target_var) if target_var > 0 and math.isfinite(target_var) else 1.0
        return HyperBounds(
            (self.scale[0] * v, self.scale[1] * v),
            self.bandwidth,
            (self.noise_var[0] * v, self.noise_var[1] * v),
        )

    def log_box(self, dim: int) -> tuple[np.ndarray, np.ndarray]:
        lo = [self.scale[0]] + [self.bandwidth[0]] * dim + [self.noise_var[0]]
        hi = [self.scale[1]] + [self.bandwidth[1]] * dim + [self.noise_var[1]]
        return np.log(lo), np.log(hi)

    def clamp(self, params: KernelParams) -> KernelParams:
        return KernelParams(
            float(np.clip(params.scale, *self.scale)),
            tuple(np.clip(params.bw, *self.bandwidth)),
            float(np.clip(params.noise_var, *self.noise_var)),
        )


@dataclass
class FitResult:
    params: KernelParams
    log_marginal_likelihood: float
    degenerate: bool = False
    start_values: list[float] = field(default_factory=list)
    evaluations: int = 0


def default_params(dim: int, bounds: HyperBounds | None = None, target_var: float = 1.0) -> KernelParams:
    bounds = bounds or HyperBounds().scaled(target_var)
    v = target_var if target_var > 0 else 1.0
    return bounds.clamp(KernelParams(v, (0.25,) * dim, 1e-3 * v))


class _Likelihood:
    """Log evidence as a function of log-parameters, with distances cached."""

    def __init__(self, X: np.ndarray, y: np.ndarray):
        self.sqdiff = (X[:, None, :] - X[None, :, :]) ** 2  # (n, n, d)
        self.resid = y - np.median(y)
        self.n = len(y)
        self.calls = 0

    def __call__(self, theta: np.ndarray) -> float:
        self.calls += 1
        s, noise = math.exp(theta[0]), math.exp(theta[-1])
        inv_bw2 = np.exp(-2.0 * theta[1:-1])
        K = s * np.exp(-0.5 * (self.sqdiff @ inv_bw2))
        K[np.diag_indices_from(K)] += noise
        try:
            L, _ = robust_cholesky(K, s)
        except NumericalError:
            return -math.inf
        a = cho_solve((L, True), self.resid, check_finite=False)
        return float(
            -0.5 * self.resid @ a - np.log(np.diag(L)).sum() - 0.5 * self.n * LOG_2PI
        )


def fit_hyperparams(
    inputs,
    targets,
    bounds: HyperBounds | None = None,
    rng=None,
    n_starts: int = 8,
    sweeps: int = 2,
    golden_iters: int = 10,
) -> FitResult:
    """Maximize the log marginal likelihood over scale, bandwidths and noise.

    Multistart coordinate-wise golden-section search in log-parameter space.
    The first start is ``default_params``; the rest are log-uniform in the box.
    A coordinate move is kept only if it improves the objective, so the result
    is never worse than any start.
    """
    y = np.asarray(targets, dtype=float).reshape(-1)
    X = np.atleast_2d(np.asarray(inputs, dtype=float))
    if len(y) < 2:
        raise ContractError("hyperparameter fitting needs at least two observations")
    dim = X.shape[1]
    var = float(np.var(y))
    bounds = bounds or HyperBounds().scaled(var)
    default = default_params(dim, bounds, var)
    spread = float(np.ptp(y))
    if spread <= 1e-12 * max(1.0, float(np.max(np.abs(y)))):
        return FitResult(default, log_marginal_likelihood(default, X, y), degenerate=True)

    rng = np.random.default_rng(rng)
    lo, hi = bounds.log_box(dim)
    lml = _Likelihood(X, y)
    starts = [np.log([default.scale, *default.bandwidths, default.noise_var])]
    for _ in range(n_starts - 1):
        starts.append(rng.uniform(lo, hi))

    best_theta, best_val, start_values = None, -math.inf, []
    for theta in starts:
        theta = np.clip(theta, lo, hi)
        val = lml(theta)
        start_values.append(val)
        for sweep in range(sweeps):
            for i in range(len(theta)):
                if sweep == 0:
                    a, b = lo[i], hi[i]
                else:
                    a, b = max(lo[i], theta[i] - 1.0), min(hi[i], theta[i] + 1.0)
                trial = theta.copy()

                def along(v, i=i, trial=trial):
                    trial[i] = v
                    return lml(trial)

                v_new, f_new = golden_section_max(along, a, b, golden_iters)
                if f_new > val:
                    theta = theta.copy()
                    theta[i] = v_new
                    val = f_new
        if val > best_val:
            best_theta, best_val = theta, val

    if best_theta is None:
        raise NumericalError("marginal likelihood could not be evaluated at any start")
    e = np.exp(best_theta)
    params = bounds.clamp(KernelParams(e[0], tuple(e[1:-1]), e[-1]))
    final = log_marginal_likelihood(params, X, y)
    return FitResult(params, final, False, start_values, lml.calls)


def sample_gp_exact(params: KernelParams, X, n_draws: int, rng=None) -> np.ndarray:
    """Exact joint-Gaussian prior draws at the rows of ``X`` (shape ``(n_draws, len(X))``)."""
    rng = np.random.default_rng(rng)
    K = kernel_matrix(params, X, X)
    L, _ = robust_cholesky(K, params.scale)
    return (L @ rng.standard_normal((len(K), n_draws))).T

