"""Benchmark objectives and the subprocess black-box protocol.

Every objective set maps points of ``[0, 1]^d`` to K values that are to be
*maximized*; minimization benchmarks are negated here.  ``evaluate`` is the
noiseless function (batched, ``(m, d) -> (m, K)``) and ``observe`` adds iid
Gaussian noise per objective.
"""

from __future__ import annotations

import functools
import json
import math
import queue
import shlex
import subprocess
import threading
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ConfigError, ContractError, ObjectiveError

# extrema of the 2-d functions on the unit square (dense grid + Nelder-Mead polish)
BRANIN_MIN = 0.39788735772973816
BRANIN_MAX = 308.12909601160663
CURRIN_MIN = 1.1804080208620997
CURRIN_MAX = 13.798722044728438

PROBE_POINTS = 100_000
PROBE_SEED = 20190101


@dataclass(eq=False)
class ObjectiveSet:
    name: str
    K: int
    d: int
    func: Callable[[np.ndarray], np.ndarray] | None
    noise_stds: np.ndarray
    known_ranges: np.ndarray | None = None
    spec: dict = field(default_factory=dict)

    def __post_init__(self):
        self.noise_stds = np.broadcast_to(np.asarray(self.noise_stds, dtype=float), (self.K,)).copy()
        if np.any(self.noise_stds < 0):
            raise ContractError("noise standard deviations must be nonnegative")
        if self.known_ranges is not None:
            self.known_ranges = np.asarray(self.known_ranges, dtype=float).reshape(self.K, 2)

    @property
    def has_true_function(self) -> bool:
        return self.func is not None

    def _points(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.d:
            raise ContractError(f"{self.name} expects {self.d}-d points, got shape {X.shape}")
        return X

    def evaluate(self, X) -> np.ndarray:
        """Noiseless objective values, shape ``(m, K)``."""
        if self.func is None:
            raise ContractError(f"objective {self.name!r} has no closed-form true function")
        return np.asarray(self.func(self._points(X)), dtype=float).reshape(-1, self.K)

    def observe(self, x, rng) -> np.ndarray:
        """One noisy observation at a single point."""
        y = self.evaluate(x)[0]
        if np.any(self.noise_stds > 0):
            y = y + self.noise_stds * rng.standard_normal(self.K)
        return y

    @functools.cached_property
    def probe_ranges(self) -> np.ndarray:
        """Per-objective (min, max) over a fixed uniform probe of ``PROBE_POINTS`` points."""
        rng = np.random.default_rng(PROBE_SEED)
        lo = np.full(self.K, np.inf)
        hi = np.full(self.K, -np.inf)
        for _ in range(PROBE_POINTS // 10_000):
            vals = self.evaluate(rng.uniform(size=(10_000, self.d)))
            lo = np.minimum(lo, vals.min(axis=0))
            hi = np.maximum(hi, vals.max(axis=0))
        return np.stack([lo, hi], axis=1)

    def close(self):
        pass


# ---------------------------------------------------------------------------
# Built-in benchmarks
# ---------------------------------------------------------------------------


def _circle(X):
    x, y = X[:, 0], X[:, 1]
    return np.stack([x * y, y * np.sqrt(np.clip(1.0 - x * x, 0.0, None))], axis=1)


def circle_pair(noise_std: float | None = None) -> ObjectiveSet:
    """``f1 = x y`` and ``f2 = y sqrt(1 - x^2)``: a quarter-circle Pareto front at ``y = 1``."""
    noise = 0.01 if noise_std is None else noise_std
    return ObjectiveSet(
        "circle", 2, 2, _circle, np.full(2, noise), np.array([[0.0, 1.0], [0.0, 1.0]]),
        {"name": "circle"},
    )


def branin(u, v):
    """Standard Branin with its domain ``[-5, 10] x [0, 15]`` mapped to the unit square."""
    x1 = 15.0 * u - 5.0
    x2 = 15.0 * v
    return (
        (x2 - 5.1 / (4 * math.pi**2) * x1**2 + 5.0 / math.pi * x1 - 6.0) ** 2
        + 10.0 * (1.0 - 1.0 / (8.0 * math.pi)) * np.cos(x1)
        + 10.0
    )


def currin_exp(u, v):
    v = np.asarray(v, dtype=float)
    safe = np.where(v > 0, v, 1.0)
    decay = np.where(v > 0, np.exp(-1.0 / (2.0 * safe)), 0.0)
    num = 2300 * u**3 + 1900 * u**2 + 2092 * u + 60
    den = 100 * u**3 + 500 * u**2 + 4 * u + 20
    return (1.0 - decay) * num / den


def _branin_currin(X):
    b = 0.5 * (branin(X[:, 0], X[:, 1]) + branin(X[:, 2], X[:, 3]))
    c = 0.5 * (currin_exp(X[:, 0], X[:, 1]) + currin_exp(X[:, 2], X[:, 3]))
    return np.stack([-b, c], axis=1)


def branin_currin_4d(noise_scale: float = 0.01) -> ObjectiveSet:
    """Branin-4 (negated) and CurrinExp-4 on ``[0, 1]^4``.

    Each 4-d function averages its 2-d form over the coordinate pairs
    ``(x1, x2)`` and ``(x3, x4)``, so ranges equal the 2-d ranges.
    """
    ranges = np.array([[-BRANIN_MAX, -BRANIN_MIN], [CURRIN_MIN, CURRIN_MAX]])
    noise = noise_scale * (ranges[:, 1] - ranges[:, 0])
    return ObjectiveSet(
        "branin_currin", 2, 4, _branin_currin, noise, ranges, {"name": "branin_currin"}
    )


class _FeatureDraw:
    """Fixed random-Fourier-feature prior draw with unit scale."""

    def __init__(self, rng, d: int, bandwidth: float, n_features: int):
        self.W = rng.standard_normal((n_features, d)) / bandwidth
        self.b = rng.uniform(0.0, 2.0 * math.pi, n_features)
        self.amp = math.sqrt(2.0 / n_features) * rng.standard_normal(n_features)

    def __call__(self, X):
        return np.cos(X @ self.W.T + self.b) @ self.amp


def random_gp_objectives(
    K: int,
    d: int,
    seed: int,
    bandwidth: float = 0.2,
    n_features: int = 1024,
    noise_scale: float = 0.01,
) -> ObjectiveSet:
    """K independent SE-kernel GP prior draws (scale 1), fixed by ``seed``."""
    if K < 1 or d < 1:
        raise ContractError("random GP objectives need K, d >= 1")
    rng = np.random.default_rng(seed)
    draws = [_FeatureDraw(rng, d, bandwidth, n_features) for _ in range(K)]
    # one matmul and one cos for all K draws
    W = np.concatenate([f.W for f in draws])
    b = np.concatenate([f.b for f in draws])
    A = np.zeros((K * n_features, K))
    for k, f in enumerate(draws):
        A[k * n_features:(k + 1) * n_features, k] = f.amp

    def func(X):
        return np.cos(np.asarray(X, dtype=float) @ W.T + b) @ A

    obj = ObjectiveSet(
        "random_gp", K, d, func, np.zeros(K), None,
        {"name": "random_gp", "K": K, "d": d, "seed": seed},
    )
    if noise_scale:
        r = obj.probe_ranges
        obj.noise_stds = noise_scale * (r[:, 1] - r[:, 0])
    return obj


# ---------------------------------------------------------------------------
# Subprocess protocol
# ---------------------------------------------------------------------------


class SubprocessObjective(ObjectiveSet):
    """Black box behind a child process speaking JSON lines.

    Request ``{"x": [...]}`` and response ``{"y": [...]}``, one object per
    line.  One request is in flight at a time.
    """

    def __init__(self, command: str, K: int, d: int, timeout: float = 300.0):
        super().__init__(
            "subprocess", K, d, None, np.zeros(K), None,
            {"name": "subprocess", "command": command, "K": K, "d": d, "timeout": timeout},
        )
        self.command = command
        self.timeout = timeout
        self._proc: subprocess.Popen | None = None
        self._lines: queue.Queue = queue.Queue()

    def _start(self):
        try:
            self._proc = subprocess.Popen(
                shlex.split(self.command),
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                text=True,
                encoding="utf-8",
                bufsize=1,
            )
        except OSError as exc:
            raise ObjectiveError(f"cannot start objective command {self.command!r}: {exc}") from exc
        threading.Thread(target=self._pump, args=(self._proc.stdout,), daemon=True).start()

    def _pump(self, stream):
        for line in stream:
            self._lines.put(line)
        self._lines.put(None)

    def _request(self, x: np.ndarray) -> np.ndarray:
        if self._proc is None:
            self._start()
        if self._proc.poll() is not None:
            raise ObjectiveError(f"objective process exited with code {self._proc.returncode}")
        try:
            self._proc.stdin.write(json.dumps({"x": [float(v) for v in x]}) + "\n")
            self._proc.stdin.flush()
        except (BrokenPipeError, OSError) as exc:
            raise ObjectiveError(f"objective process closed its input: {exc}") from exc
        try:
            line = self._lines.get(timeout=self.timeout)
        except queue.Empty:
            raise ObjectiveError(f"objective process timed out after {self.timeout} s") from None
        if line is None:
            code = self._proc.wait()
            raise ObjectiveError(f"objective process exited with code {code}")
        try:
            y = np.asarray(json.loads(line)["y"], dtype=float).reshape(-1)
        except (ValueError, KeyError, TypeError) as exc:
            raise ObjectiveError(f"malformed objective response {line.strip()!r}: {exc}") from None
        if y.shape != (self.K,) or not np.all(np.isfinite(y)):
            raise ObjectiveError(f"objective response {line.strip()!r} is not {self.K} finite values")
        return y

    def observe(self, x, rng=None) -> np.ndarray:
        return self._request(self._points(x)[0])

    def close(self):
        if self._proc is not None and self._proc.poll() is None:
            self._proc.stdin.close()
            try:
                self._proc.wait(timeout=5)
            except subprocess.TimeoutExpired:
                self._proc.kill()
                self._proc.wait()
        self._proc = None


def subprocess_objective(command: str, K: int, d: int, timeout: float = 300.0) -> SubprocessObjective:
    return SubprocessObjective(command, K, d, timeout)


@functools.lru_cache(maxsize=16)
def _cached_random_gp(K, d, seed, bandwidth, n_features, noise_scale):
    return random_gp_objectives(K, d, seed, bandwidth, n_features, noise_scale)


def from_spec(spec: dict) -> ObjectiveSet:
    """Objective set from its config record, e.g. ``{"name": "circle"}``."""
    if not isinstance(spec, dict) or "name" not in spec:
        raise ConfigError(f"objective must be a record with a 'name' field: {spec!r}")
    name = spec["name"]
    try:
        if name == "circle":
            return circle_pair(spec.get("noise_std"))
        if name == "branin_currin":
            return branin_currin_4d(spec.get("noise_scale", 0.01))
        if name == "random_gp":
            return _cached_random_gp(
                int(spec["K"]), int(spec["d"]), int(spec["seed"]),
                float(spec.get("bandwidth", 0.2)), int(spec.get("n_features", 1024)),
                float(spec.get("noise_scale", 0.01)),
            )
        if name == "subprocess":
            return subprocess_objective(
                str(spec["command"]), int(spec["K"]), int(spec["d"]), float(spec.get("timeout", 300.0))
            )
    except KeyError as exc:
        raise ConfigError(f"objective {name!r} is missing field {exc.args[0]!r}") from None
    raise ConfigError(f"unknown objective {name!r}; expected circle, branin_currin, random_gp or subprocess")
