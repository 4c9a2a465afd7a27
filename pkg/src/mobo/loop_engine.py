"""The optimization loop: initial design, then sample a weight, maximize the
acquisition, evaluate every objective, refit, repeat.

Runs are persisted as JSON lines (a header, then one record per evaluation)
and are resumable.  Randomness comes from named substreams keyed by the root
seed and the step index, so a resumed run replays exactly the same draws as
an uninterrupted one without storing generator state.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import objectives as objectives_mod
from . import weights as weights_mod
from .acq_opt import OptBudget, maximize
from .acquisition import AcquisitionSpec, BetaSchedule, beta_value, ts_acquisition, ucb_linear, ucb_tchebychev
from .errors import ConfigError, ContractError, LogError, NoOracleError
from .kernel_gp import HyperBounds, KernelParams, default_params, draw_spectral_sample, fit_factorization, fit_hyperparams
from .objectives import ObjectiveSet
from .scalarize import LINEAR

log = logging.getLogger(__name__)

LOG_VERSION = 1
STREAMS = {"init": 0, "weights": 1, "ts": 2, "mle": 3, "noise": 4, "random": 5}
_SHAPES = {"circle": (2, 2), "branin_currin": (2, 4)}


def substream(seed: int, name: str, index: int = 0) -> np.random.Generator:
    """Independent generator for one (stream, step) pair of a run."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(STREAMS[name], index)))


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ExperimentConfig:
    objective: dict
    K: int
    d: int
    T: int
    acquisition: AcquisitionSpec
    weight_dist: object
    seed: int
    n_init: int = 10
    refit_every: int = 10
    acq_opt: OptBudget = OptBudget()
    output_path: str | None = None

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        for name in ("objective", "T", "acquisition", "weights", "seed"):
            if name not in data:
                raise ConfigError(f"config is missing required field {name!r}")
        obj = data["objective"]
        if not isinstance(obj, dict) or "name" not in obj:
            raise ConfigError("field 'objective' must be a record with a 'name'")
        if obj["name"] in _SHAPES:
            K, d = _SHAPES[obj["name"]]
        else:
            try:
                K, d = int(obj["K"]), int(obj["d"])
            except KeyError as exc:
                raise ConfigError(f"objective {obj['name']!r} is missing field {exc.args[0]!r}") from None
        for name, value in (("K", K), ("d", d)):
            if name in data and int(data[name]) != value:
                raise ConfigError(f"field {name!r} = {data[name]} disagrees with objective ({value})")

        def integer(name, default=None, minimum=0):
            value = data.get(name, default)
            if isinstance(value, bool) or not isinstance(value, int) or value < minimum:
                raise ConfigError(f"field {name!r} must be an integer >= {minimum}, got {value!r}")
            return value

        acq = data["acquisition"]
        if not isinstance(acq, dict) or "method" not in acq:
            raise ConfigError("field 'acquisition' must be a record with a 'method'")
        try:
            spec = AcquisitionSpec(
                acq["method"],
                acq.get("scalarization", LINEAR),
                BetaSchedule(float(acq.get("beta_coefficient", 0.125))),
                None if acq.get("reference") is None else tuple(float(v) for v in acq["reference"]),
                int(acq.get("n_features", 512)),
            )
        except ContractError as exc:
            raise ConfigError(f"bad field 'acquisition': {exc}") from None
        if spec.reference is not None and len(spec.reference) != K:
            raise ConfigError(f"acquisition reference must have {K} entries")
        dist = weights_mod.from_spec(data["weights"])
        if dist.K != K:
            raise ConfigError(f"weight distribution has K={dist.K} but objective has K={K}")
        opt = data.get("acq_opt", {})
        try:
            budget = OptBudget(
                int(opt.get("max_evals", 2000)),
                opt.get("max_rects"),
                int(opt.get("local_refine_evals", 200)),
            )
        except ContractError as exc:
            raise ConfigError(f"bad field 'acq_opt': {exc}") from None
        return cls(
            objective=dict(obj),
            K=K,
            d=d,
            T=integer("T"),
            acquisition=spec,
            weight_dist=dist,
            seed=integer("seed"),
            n_init=integer("n_init", 10),
            refit_every=integer("refit_every", 10, minimum=1),
            acq_opt=budget,
            output_path=data.get("output_path"),
        )

    def to_dict(self) -> dict:
        """Canonical form with defaults filled in; excludes the output path."""
        a = self.acquisition
        return {
            "objective": self.objective,
            "K": self.K,
            "d": self.d,
            "T": self.T,
            "n_init": self.n_init,
            "seed": self.seed,
            "refit_every": self.refit_every,
            "acquisition": {
                "method": a.method,
                "scalarization": a.scalarization,
                "beta_coefficient": a.beta.coefficient,
                "reference": None if a.reference is None else list(a.reference),
                "n_features": a.n_features,
            },
            "weights": self.weight_dist.to_dict(),
            "acq_opt": {
                "max_evals": self.acq_opt.max_evals,
                "max_rects": self.acq_opt.max_rects,
                "local_refine_evals": self.acq_opt.local_refine_evals,
            },
        }

    def hash(self) -> str:
        return _digest(self.to_dict())

    def family_hash(self) -> str:
        """Hash of everything except the seed; equal for replicate runs."""
        d = self.to_dict()
        d.pop("seed")
        return _digest(d)


def _digest(obj) -> str:
    return hashlib.sha256(json.dumps(obj, sort_keys=True, separators=(",", ":")).encode()).hexdigest()


def load_config(path) -> ExperimentConfig:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
    return ExperimentConfig.from_dict(data)


# ---------------------------------------------------------------------------
# Log files
# ---------------------------------------------------------------------------


def fits_path(log_path) -> Path:
    return Path(str(log_path) + ".fits.jsonl")


def timing_path(log_path) -> Path:
    return Path(str(log_path) + ".timing.jsonl")


def _dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def read_log(path, repair: bool = False) -> tuple[dict, list[dict]]:
    """Header and records of an evaluation log.

    A trailing line that is incomplete or unparsable is dropped with a
    warning (and cut from the file when ``repair`` is set).
    """
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise LogError(f"cannot read log {path}: {exc}") from None
    lines = raw.split(b"\n")
    complete, tail = lines[:-1], lines[-1]
    parsed = []
    good_bytes = 0
    for i, line in enumerate(complete):
        try:
            parsed.append(json.loads(line))
        except json.JSONDecodeError:
            if i == len(complete) - 1 and not tail:
                log.warning("dropping unparsable trailing line in %s", path)
                break
            raise LogError(f"{path}: line {i + 1} is not valid JSON") from None
        good_bytes += len(line) + 1
    if tail:
        log.warning("dropping truncated trailing line in %s", path)
    if repair and good_bytes != len(raw):
        with open(path, "r+b") as fh:
            fh.truncate(good_bytes)
    if not parsed or "config_hash" not in parsed[0]:
        raise LogError(f"{path}: missing header line")
    header, records = parsed[0], parsed[1:]
    for i, rec in enumerate(records):
        if rec.get("t") != i:
            raise LogError(f"{path}: record {i} has t={rec.get('t')}")
    return header, records


def read_jsonl(path) -> list[dict]:
    out = []
    if not Path(path).exists():
        return out
    for line in Path(path).read_text().splitlines():
        try:
            out.append(json.loads(line))
        except json.JSONDecodeError:
            break
    return out


# ---------------------------------------------------------------------------
# The loop
# ---------------------------------------------------------------------------


@dataclass
class ExperimentState:
    config_hash: str
    records: list[dict]
    params: list[KernelParams | None]
    log_path: Path | None = None
    fits: list[dict] = field(default_factory=list)


def objective_widths(objective: ObjectiveSet, Y: np.ndarray) -> np.ndarray:
    """Range of each objective used to map preference weights to raw units."""
    if objective.known_ranges is not None:
        r = objective.known_ranges
        return r[:, 1] - r[:, 0]
    if objective.has_true_function:
        from .regret import ObjectiveNormalizer

        return ObjectiveNormalizer.from_objective(objective).width
    if len(Y) >= 2:
        w = Y.max(axis=0) - Y.min(axis=0)
        return np.where(w > 1e-12, w, 1.0)
    return np.ones(objective.K)


def raw_weights(lam: np.ndarray, widths: np.ndarray) -> np.ndarray:
    """Weights on normalized objectives expressed for raw objectives."""
    scaled = lam / widths
    return scaled / scaled.sum()


class Experiment:
    """One run of the loop bound to a config, an objective and a log file."""

    def __init__(self, config: ExperimentConfig, objective: ObjectiveSet | None = None, log_path=None):
        self.config = config
        self.objective = objective or objectives_mod.from_spec(config.objective)
        if (self.objective.K, self.objective.d) != (config.K, config.d):
            raise ConfigError("objective shape disagrees with config")
        path = log_path or config.output_path
        self.log_path = Path(path) if path is not None else None
        self.records: list[dict] = []
        self.fits: list[dict] = []
        self.params: list[KernelParams | None] = [None] * config.K
        self.init_design = substream(config.seed, "init").uniform(size=(config.n_init, config.d))

    # -- persistence -------------------------------------------------------

    def _header(self) -> dict:
        c = self.config
        try:
            from .regret import ObjectiveNormalizer

            norm = ObjectiveNormalizer.from_objective(self.objective).to_dict()
        except NoOracleError:
            norm = {"source": "observed", "ranges": None}
        return {
            "version": LOG_VERSION,
            "config_hash": c.hash(),
            "config": c.to_dict(),
            "weight_space": norm,
        }

    def _start_files(self, resume: bool):
        if self.log_path is None:
            return
        if resume and self.log_path.exists() and self.log_path.stat().st_size:
            header, records = read_log(self.log_path, repair=True)
            if header["config_hash"] != self.config.hash():
                raise LogError(
                    f"config hash mismatch: log {self.log_path} has {header['config_hash']}, "
                    f"config has {self.config.hash()}"
                )
            self.records = records
            n_loop = max(0, len(records) - self.config.n_init)
            fits = [f for f in read_jsonl(fits_path(self.log_path)) if f["t"] < n_loop]
            self.fits = fits
            with open(fits_path(self.log_path), "w") as fh:
                fh.writelines(_dumps(f) + "\n" for f in fits)
            for f in fits:
                self.params[f["objective_index"]] = KernelParams.from_dict(f["params"])
            timing = read_jsonl(timing_path(self.log_path))[: len(records)]
            with open(timing_path(self.log_path), "w") as fh:
                fh.writelines(_dumps(r) + "\n" for r in timing)
            return
        self.log_path.parent.mkdir(parents=True, exist_ok=True)
        with open(self.log_path, "w") as fh:
            fh.write(_dumps(self._header()) + "\n")
        fits_path(self.log_path).write_text("")
        timing_path(self.log_path).write_text("")

    def _append(self, path: Path, obj: dict):
        if self.log_path is None:
            return
        with open(path, "a") as fh:
            fh.write(_dumps(obj) + "\n")
            fh.flush()

    # -- model fitting ---------------------------------------------------------

    def _data(self) -> tuple[np.ndarray, np.ndarray]:
        X = np.array([r["x"] for r in self.records]).reshape(-1, self.config.d)
        Y = np.array([r["y"] for r in self.records]).reshape(-1, self.config.K)
        return X, Y

    def _refit(self, i: int, X: np.ndarray, Y: np.ndarray):
        rng = substream(self.config.seed, "mle", i)
        for k in range(self.config.K):
            y = Y[:, k]
            var = float(np.var(y)) if len(y) else 1.0
            if len(y) >= 2:
                fit = fit_hyperparams(X, y, HyperBounds().scaled(var), rng)
                params, lml, degenerate = fit.params, fit.log_marginal_likelihood, fit.degenerate
            else:
                params, lml, degenerate = default_params(self.config.d, target_var=var), None, True
            self.params[k] = params
            entry = {
                "t": i,
                "objective_index": k,
                "params": params.to_dict(),
                "log_marginal_likelihood": lml,
                "degenerate": degenerate,
            }
            self.fits.append(entry)
            self._append(fits_path(self.log_path) if self.log_path else None, entry)

    def _models(self, X, Y):
        models = []
        for k in range(self.config.K):
            params = self.params[k]
            if params is None:
                var = float(np.var(Y[:, k])) if len(Y) > 1 else 1.0
                params = default_params(self.config.d, target_var=var)
            models.append(fit_factorization(params, X, Y[:, k]))
        return models

    # -- one loop step -----------------------------------------------------

    def _propose(self, i: int) -> tuple[np.ndarray, dict]:
        c = self.config
        acq = c.acquisition
        kind = acq.scalarization
        X, Y = self._data()
        lam = weights_mod.weights_for_scalarization(c.weight_dist, kind, substream(c.seed, "weights", i))
        lam_acq = raw_weights(lam, objective_widths(self.objective, Y))
        meta = {"lambda": lam.tolist(), "lambda_acq": lam_acq.tolist(), "acq_value": None}
        if acq.method == "random":
            return substream(c.seed, "random", i).uniform(size=c.d), meta

        if i % c.refit_every == 0:
            self._refit(i, X, Y)
        models = self._models(X, Y)
        z = None
        if kind != LINEAR:
            if acq.reference is not None:
                z = np.asarray(acq.reference, dtype=float)
            elif len(Y):
                z = Y.min(axis=0)

        if acq.method == "ucb":
            beta = beta_value(acq.beta, i + 1)

            def objective(Xc):
                stats = [m.predict(Xc) for m in models]
                means = np.stack([s[0] for s in stats])
                stds = np.stack([s[1] for s in stats])
                if kind == LINEAR:
                    return ucb_linear(lam_acq, means, stds, beta)
                return ucb_tchebychev(lam_acq, means, stds, beta, z)

        else:
            rng = substream(c.seed, "ts", i)
            draws = [draw_spectral_sample(m, acq.n_features, rng) for m in models]

            def objective(Xc):
                return ts_acquisition(lam_acq, draws, kind, z, Xc)

        res = maximize(objective, c.d, c.acq_opt)
        meta["acq_value"] = res.value_best
        return res.x_best, meta

    def run(self, max_steps: int | None = None, resume: bool = False) -> ExperimentState:
        c = self.config
        self._start_files(resume)
        total = c.n_init + c.T
        done = 0
        try:
            while len(self.records) < total and (max_steps is None or done < max_steps):
                t = len(self.records)
                start = time.perf_counter()
                if t < c.n_init:
                    x = self.init_design[t]
                    rec = {"t": t, "phase": "init"}
                    meta = {"lambda": None, "lambda_acq": None, "acq_value": None}
                else:
                    x, meta = self._propose(t - c.n_init)
                    rec = {"t": t, "phase": "loop"}
                x = np.clip(np.asarray(x, dtype=float), 0.0, 1.0)
                y = self.objective.observe(x, substream(c.seed, "noise", t))
                rec.update(x=x.tolist(), y=[float(v) for v in y], **meta)
                self.records.append(rec)
                self._append(self.log_path, rec)
                wall_ms = 1000.0 * (time.perf_counter() - start)
                self._append(timing_path(self.log_path) if self.log_path else None, {"t": t, "wall_ms": wall_ms})
                done += 1
        finally:
            self.objective.close()
        return ExperimentState(c.hash(), self.records, list(self.params), self.log_path, self.fits)


def run(config: ExperimentConfig, max_steps: int | None = None, resume: bool = False,
        objective: ObjectiveSet | None = None, log_path=None) -> ExperimentState:
    """Run (or continue) an experiment; returns the final state."""
    return Experiment(config, objective, log_path).run(max_steps=max_steps, resume=resume)


def resume(log_path, config: ExperimentConfig | None = None, max_steps: int | None = None,
           objective: ObjectiveSet | None = None) -> ExperimentState:
    """Continue the run stored at ``log_path``.

    Without ``config`` the one recorded in the header is used; with one, its
    hash must match the header.
    """
    header, _ = read_log(log_path)
    if config is None:
        config = ExperimentConfig.from_dict(header["config"])
    return Experiment(config, objective, log_path).run(max_steps=max_steps, resume=True)


def seed_override(config: ExperimentConfig) -> ExperimentConfig:
    """Apply ``MOBO_SEED_OVERRIDE`` from the environment, if set."""
    value = os.environ.get("MOBO_SEED_OVERRIDE")
    if not value:
        return config
    try:
        seed = int(value)
    except ValueError:
        raise ConfigError(f"MOBO_SEED_OVERRIDE must be an integer, got {value!r}") from None
    data = config.to_dict()
    data["seed"] = seed
    data["output_path"] = config.output_path
    return ExperimentConfig.from_dict(data)
