"""Preference-aware regret: cumulative, simple-regret proxy and seed averages.

All quantities are computed on objectives linearly mapped to ``[0, 1]`` and
with the weights exactly as recorded (they already live on the simplex of
normalized objectives).  The Tchebychev reference point is the normalized
lower end, i.e. zero, unless the run configured its own.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .acq_opt import OptBudget, maximize
from .errors import ContractError, LogError, NoOracleError
from .objectives import PROBE_POINTS, PROBE_SEED, ObjectiveSet
from .scalarize import check_kind, scalarize
from .weights import weights_for_scalarization

ORACLE_BUDGET = OptBudget(max_evals=10_000, local_refine_evals=1_000)
CSV_COLUMNS = (
    "T", "sr_proxy_mean", "sr_proxy_std", "cum_regret_mean", "cum_regret_std", "cum_regret_over_T",
)


@dataclass(frozen=True)
class ObjectiveNormalizer:
    """Per-objective affine map ``y -> (y - lo) / (hi - lo)``."""

    lo: np.ndarray
    hi: np.ndarray
    source: str = "given"

    def __post_init__(self):
        lo = np.asarray(self.lo, dtype=float).reshape(-1)
        hi = np.asarray(self.hi, dtype=float).reshape(-1)
        if lo.shape != hi.shape or not np.all(hi > lo):
            raise ContractError(f"normalizer needs hi > lo, got lo={lo} hi={hi}")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def width(self) -> np.ndarray:
        return self.hi - self.lo

    def normalize(self, Y) -> np.ndarray:
        return (np.asarray(Y, dtype=float) - self.lo) / self.width

    def to_dict(self) -> dict:
        return {"source": self.source, "ranges": np.stack([self.lo, self.hi], axis=1).tolist()}

    @classmethod
    def identity(cls, K: int) -> "ObjectiveNormalizer":
        return cls(np.zeros(K), np.ones(K), "identity")

    @classmethod
    def from_objective(cls, objective: ObjectiveSet, padding: float = 0.01) -> "ObjectiveNormalizer":
        """Declared ranges when available, else a padded uniform probe of the true function."""
        if objective.known_ranges is not None:
            r = objective.known_ranges
            return cls(r[:, 0], r[:, 1], "known")
        if not objective.has_true_function:
            raise NoOracleError(f"objective {objective.name!r} has no true function to probe")
        r = objective.probe_ranges
        pad = padding * (r[:, 1] - r[:, 0])
        return cls(r[:, 0] - pad, r[:, 1] + pad, f"probe{PROBE_POINTS}")


class RegretOracle:
    """Maximizer of the true normalized scalarized objective.

    DIRECT with a 10^4 budget, cross-checked against a fixed 10^5-point probe;
    the larger of the two is returned so regret is never understated.
    """

    def __init__(
        self,
        objective: ObjectiveSet,
        normalizer: ObjectiveNormalizer | None = None,
        budget: OptBudget = ORACLE_BUDGET,
        n_probe: int = PROBE_POINTS,
    ):
        if not objective.has_true_function:
            raise NoOracleError(f"regret needs the true function; {objective.name!r} is a black box")
        self.objective = objective
        self.normalizer = normalizer or ObjectiveNormalizer.from_objective(objective)
        self.budget = budget
        rng = np.random.default_rng(PROBE_SEED + 1)
        self.probe = self.values(rng.uniform(size=(n_probe, objective.d)))

    def values(self, X) -> np.ndarray:
        """Normalized true objective values, shape ``(m, K)``."""
        return self.normalizer.normalize(self.objective.evaluate(X))

    def scalarized(self, lam, kind: str, z, X) -> np.ndarray:
        return scalarize(kind, lam, self.values(X).T, z)

    def max(self, lam, kind: str, z=None) -> float:
        probe_best = float(np.max(scalarize(kind, lam, self.probe.T, z)))
        res = maximize(lambda X: self.scalarized(lam, kind, z, X), self.objective.d, self.budget)
        return max(res.value_best, probe_best)


def oracle_max(objective, lam, kind: str, z=None, normalizer=None, oracle: RegretOracle | None = None) -> float:
    oracle = oracle or RegretOracle(objective, normalizer)
    return oracle.max(np.asarray(lam, dtype=float), check_kind(kind), z)


@dataclass
class RegretReport:
    instantaneous: np.ndarray
    cumulative: np.ndarray
    sr_proxy: np.ndarray
    mc_count: int
    seeds: list = field(default_factory=list)
    config_key: str = ""


def cumulative_regret(
    records: Sequence[dict], oracle: RegretOracle, kind: str, z=None
) -> tuple[np.ndarray, np.ndarray]:
    """Per-step regret ``max_x g(lam_t, x) - g(lam_t, x_t)`` over loop records and its running sum."""
    kind = check_kind(kind)
    loop = [r for r in records if r.get("phase", "loop") == "loop"]
    if not loop:
        return np.zeros(0), np.zeros(0)
    if any(r.get("lambda") is None for r in loop):
        raise LogError("loop record without a recorded weight vector")
    X = np.array([r["x"] for r in loop])
    vals = oracle.values(X)
    inst = np.empty(len(loop))
    for i, rec in enumerate(loop):
        lam = np.asarray(rec["lambda"], dtype=float)
        g_t = float(scalarize(kind, lam, vals[i], z))
        # x_t itself is a feasible point, so the true max is at least g_t
        best = max(oracle.max(lam, kind, z), g_t)
        inst[i] = best - g_t
    inst[(inst < 0) & (inst > -1e-9)] = 0.0
    return inst, np.cumsum(inst)


def simple_regret_proxy(values, weight_dist, L: int, kind: str, z=None, rng=None) -> np.ndarray:
    """``-(1/L) sum_j max_{t<=T} g(lam_j, x_t)`` for every prefix length T.

    ``values`` holds the normalized true objective values of the evaluated
    points in order, shape ``(N, K)``.  The same L weight draws serve every T.
    """
    if L < 1:
        raise ContractError("Monte-Carlo count L must be at least 1")
    kind = check_kind(kind)
    values = np.atleast_2d(np.asarray(values, dtype=float))
    rng = np.random.default_rng(rng)
    lams = np.array([weights_for_scalarization(weight_dist, kind, rng) for _ in range(L)])
    G = np.stack([scalarize(kind, lam, values.T, z) for lam in lams])  # (L, N)
    return -np.maximum.accumulate(G, axis=1).mean(axis=0)


@dataclass
class RegretSummary:
    T: np.ndarray
    sr_proxy_mean: np.ndarray
    sr_proxy_std: np.ndarray
    cum_regret_mean: np.ndarray
    cum_regret_std: np.ndarray
    cum_regret_over_T: np.ndarray
    n_runs: int


def aggregate_reports(reports: Sequence[RegretReport]) -> RegretSummary:
    """Mean and (population) standard deviation across runs, per loop step T."""
    if not reports:
        raise ContractError("nothing to aggregate")
    keys = {r.config_key for r in reports}
    if len(keys) > 1:
        raise LogError(f"runs come from different configurations: {sorted(keys)}")
    lengths = {len(r.sr_proxy) for r in reports} | {len(r.cumulative) for r in reports if len(r.cumulative)}
    if len(lengths) > 1:
        raise LogError(f"runs have different lengths: {sorted(lengths)}")
    sr = np.stack([r.sr_proxy for r in reports])
    n = sr.shape[1]
    if all(len(r.cumulative) for r in reports):
        cum = np.stack([r.cumulative for r in reports])
    else:
        cum = np.full((len(reports), n), np.nan)
    T = np.arange(1, n + 1)
    cum_mean = cum.mean(axis=0)
    return RegretSummary(
        T, sr.mean(axis=0), sr.std(axis=0), cum_mean, cum.std(axis=0), cum_mean / T, len(reports)
    )


def bayes_regret_estimate(reports: Sequence[RegretReport]) -> RegretSummary:
    """Seed average of cumulative regret, the Monte-Carlo stand-in for Bayes regret."""
    if len(reports) < 2:
        raise ContractError("Bayes regret estimate needs at least two runs")
    return aggregate_reports(reports)


def build_report(
    config: dict,
    records: Sequence[dict],
    objective: ObjectiveSet,
    weight_dist,
    L: int,
    kind: str | None = None,
    rng=None,
    cumulative: bool = True,
    oracle: RegretOracle | None = None,
    normalizer: ObjectiveNormalizer | None = None,
    config_key: str = "",
) -> RegretReport:
    """Regret report for one run.

    The SR proxy is indexed by loop step; at step T it covers the initial
    design plus the first T loop evaluations.
    """
    kind = check_kind(kind or config["acquisition"]["scalarization"])
    if not objective.has_true_function:
        raise NoOracleError(f"regret needs the true function; {objective.name!r} is a black box")
    if oracle is not None:
        normalizer = oracle.normalizer
    normalizer = normalizer or ObjectiveNormalizer.from_objective(objective)
    z = None
    ref = config.get("acquisition", {}).get("reference")
    if kind == "tch" and ref is not None:
        z = normalizer.normalize(np.asarray(ref, dtype=float))
    n_init = sum(1 for r in records if r.get("phase") == "init")
    X = np.array([r["x"] for r in records]).reshape(len(records), -1)
    values = normalizer.normalize(objective.evaluate(X)) if len(records) else np.zeros((0, objective.K))
    sr = simple_regret_proxy(values, weight_dist, L, kind, z, rng)[n_init:] if len(records) else np.zeros(0)
    inst = cum = np.zeros(0)
    if cumulative:
        oracle = oracle or RegretOracle(objective, normalizer)
        inst, cum = cumulative_regret(records, oracle, kind, z)
    return RegretReport(inst, cum, sr, L, [config.get("seed")], config_key)


def write_regret_csv(path, summary: RegretSummary):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_COLUMNS)
        for i in range(len(summary.T)):
            w.writerow([
                int(summary.T[i]),
                repr(float(summary.sr_proxy_mean[i])),
                repr(float(summary.sr_proxy_std[i])),
                repr(float(summary.cum_regret_mean[i])),
                repr(float(summary.cum_regret_std[i])),
                repr(float(summary.cum_regret_over_T[i])),
            ])


def read_regret_csv(path) -> dict[str, np.ndarray]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return {c: np.array([float(r[c]) for r in rows]) for c in CSV_COLUMNS}
