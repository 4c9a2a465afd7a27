"""``mobo`` command line: run, regret, bench and plotdata.

Exit codes: 0 success, 2 bad configuration or arguments, 3 objective or
numerical failure, 4 no true function for regret or missing logs.
Diagnostics go to stderr.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from . import objectives as objectives_mod
from . import weights as weights_mod
from .errors import ConfigError, ContractError, LogError, NoOracleError, NumericalError, ObjectiveError
from .loop_engine import ExperimentConfig, load_config, read_log, run, seed_override
from .objectives import BRANIN_MAX, BRANIN_MIN, CURRIN_MAX, CURRIN_MIN
from .regret import (
    CSV_COLUMNS,
    RegretOracle,
    aggregate_reports,
    build_report,
    read_regret_csv,
    write_regret_csv,
)

log = logging.getLogger("mobo")

EXIT_OK, EXIT_CONFIG, EXIT_FAILURE, EXIT_NO_ORACLE = 0, 2, 3, 4

METHODS = {
    "ts-linear": {"method": "ts", "scalarization": "linear"},
    "ts-tch": {"method": "ts", "scalarization": "tch"},
    "ucb-linear": {"method": "ucb", "scalarization": "linear"},
    "ucb-tch": {"method": "ucb", "scalarization": "tch"},
    "random": {"method": "random", "scalarization": "linear"},
    "fixed-center": {"method": "ucb", "scalarization": "linear"},
}
BASELINES = ("random", "fixed-center")
SR_SEED = 7919  # same lambda draws for every method of a suite
DEFAULT_MC = 200


# ---------------------------------------------------------------------------
# Benchmark suites
# ---------------------------------------------------------------------------

# Preference boxes for the Branin/Currin regions, stated on the sum of two
# 2-d copies (the scale these boxes were originally quoted in).  Our 4-d
# functions average the copies, so the boxes are halved and then mapped
# to [0, 1] with the known ranges.
_BC_RAW_BOXES = {
    "high": ((-110.0, -95.0), (23.0, 27.0)),
    "mid": ((-80.0, -70.0), (16.0, 22.0)),
}
_BC_RANGES = ((-BRANIN_MAX, -BRANIN_MIN), (CURRIN_MIN, CURRIN_MAX))


def branin_currin_box(region: str) -> tuple[tuple[float, float], ...]:
    """Normalized weight box for a named preference region."""
    boxes = []
    for (a, b), (lo, hi) in zip(_BC_RAW_BOXES[region], _BC_RANGES):
        boxes.append(((a / 2 - lo) / (hi - lo), (b / 2 - lo) / (hi - lo)))
    return tuple(boxes)


@dataclass(frozen=True)
class Suite:
    name: str
    objective: dict
    weights: dict
    T: int
    n_init: int = 10
    note: str = ""


def _suites() -> dict[str, list[Suite]]:
    bc = {"name": "branin_currin"}
    return {
        "circle": [
            Suite("circle", {"name": "circle"}, {"kind": "ratio_uniform", "lo": 0.0, "hi": 0.3}, 100),
        ],
        "branin_currin": [
            Suite(
                f"branin_currin-{region}", bc,
                {"kind": "bounding_box", "boxes": [list(b) for b in branin_currin_box(region)]}, 150,
                note=f"raw box {_BC_RAW_BOXES[region]} on the two-copy sum scale",
            )
            for region in ("high", "mid")
        ] + [Suite("branin_currin-full", bc, {"kind": "sphere_uniform", "K": 2}, 150)],
        "rand6x6": [
            Suite(
                "rand6x6", {"name": "random_gp", "K": 6, "d": 6, "seed": 66},
                {"kind": "bounding_box", "boxes": [[2 / 3, 1.0]] * 6}, 100,
            ),
        ],
    }


SUITE_NAMES = ("circle", "branin_currin", "rand6x6")


def method_config(suite: Suite, method: str, seed: int, T: int | None = None, output_path=None) -> dict:
    """Config record for one (suite, method, seed) run."""
    weights = suite.weights
    if method == "fixed-center":
        center = weights_mod.from_spec(suite.weights).center()
        weights = {"kind": "fixed", "lambda": [float(v) for v in center]}
    cfg = {
        "objective": suite.objective,
        "T": suite.T if T is None else T,
        "n_init": suite.n_init,
        "seed": seed,
        "acquisition": dict(METHODS[method]),
        "weights": weights,
    }
    if output_path is not None:
        cfg["output_path"] = str(output_path)
    return cfg


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def _default_log_path(config_file: str) -> Path:
    p = Path(config_file)
    return p.with_name(p.stem + ".log.jsonl")


def cmd_run(args) -> int:
    config = seed_override(load_config(args.config))
    path = args.out or config.output_path or _default_log_path(args.config)
    state = run(config, resume=args.resume, log_path=path)
    log.info("wrote %d records to %s", len(state.records), path)
    return EXIT_OK


def _load_run(path):
    header, records = read_log(path)
    config = ExperimentConfig.from_dict(header["config"])
    return header, config, records


def _parse_weights(text):
    if text is None:
        return None
    p = Path(text)
    try:
        spec = json.loads(p.read_text()) if p.exists() else json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"--weights is neither a JSON file nor JSON text: {exc}") from None
    return weights_mod.from_spec(spec)


def regret_summary(log_paths, weight_dist=None, L=DEFAULT_MC, kind=None, cumulative=True, sr_seed=SR_SEED):
    """Aggregate regret over several logs of the same configuration family."""
    reports = []
    oracle = None
    for path in log_paths:
        header, config, records = _load_run(path)
        if config.objective["name"] == "subprocess":
            raise NoOracleError(f"{path}: subprocess objectives have no true function for regret")
        objective = objectives_mod.from_spec(config.objective)
        if oracle is None and cumulative:
            oracle = RegretOracle(objective)
        reports.append(
            build_report(
                header["config"], records, objective, weight_dist or config.weight_dist, L,
                kind=kind, rng=sr_seed, cumulative=cumulative, oracle=oracle,
                config_key=config.family_hash(),
            )
        )
    return aggregate_reports(reports)


def cmd_regret(args) -> int:
    if not args.logs:
        raise ConfigError("no log files given")
    for p in args.logs:
        if not Path(p).exists():
            raise FileNotFoundError(p)
    summary = regret_summary(
        args.logs, _parse_weights(args.weights), args.mc, args.kind, not args.no_cumulative
    )
    write_regret_csv(args.out, summary)
    log.info("wrote regret over %d runs to %s", summary.n_runs, args.out)
    return EXIT_OK


def _run_job(cfg: dict) -> str:
    config = ExperimentConfig.from_dict(cfg)
    run(config, resume=True, log_path=cfg["output_path"])
    return cfg["output_path"]


def bench(suite_name: str, out_dir, jobs: int = 1, budget: int | None = None, n_seeds: int = 5,
          mc: int = DEFAULT_MC, cumulative: bool = False, methods=tuple(METHODS)) -> dict:
    """Run a suite and write logs, regret CSVs and ``manifest.json``.

    Runs whose log is already complete are skipped, so an interrupted bench
    can be restarted with the same arguments.
    """
    suites = _suites()
    if suite_name not in suites:
        raise ConfigError(f"unknown suite {suite_name!r}; valid suites: {', '.join(SUITE_NAMES)}")
    out = Path(out_dir)
    manifest = {"suite": suite_name, "seeds": list(range(n_seeds)), "mc": mc, "sr_seed": SR_SEED,
                "baselines": {"random": "uniform random search",
                              "fixed-center": "UCB-linear with lambda fixed at the weight-distribution center"},
                "groups": []}
    jobs_cfg = []
    for suite in suites[suite_name]:
        group = {"name": suite.name, "weights": suite.weights, "note": suite.note, "runs": []}
        for method in methods:
            for seed in range(n_seeds):
                path = out / "logs" / suite.name / method / f"seed{seed}.jsonl"
                cfg = method_config(suite, method, seed, budget, path)
                ExperimentConfig.from_dict(cfg)  # fail fast on bad configs
                jobs_cfg.append(cfg)
                group["runs"].append({"method": method, "seed": seed, "log": str(path.relative_to(out))})
        manifest["groups"].append(group)
    out.mkdir(parents=True, exist_ok=True)
    if jobs > 1:
        with ProcessPoolExecutor(jobs) as pool:
            for done in pool.map(_run_job, jobs_cfg):
                log.info("finished %s", done)
    else:
        for cfg in jobs_cfg:
            log.info("finished %s", _run_job(cfg))

    for suite, group in zip(suites[suite_name], manifest["groups"]):
        dist = weights_mod.from_spec(suite.weights)
        group["regret"] = {}
        for method in methods:
            logs = [out / r["log"] for r in group["runs"] if r["method"] == method]
            if method in BASELINES:
                variants = {f"{method}-linear": "linear", f"{method}-tch": "tch"}
            else:
                variants = {method: METHODS[method]["scalarization"]}
            for label, kind in variants.items():
                csv_path = out / "regret" / suite.name / f"{label}.csv"
                csv_path.parent.mkdir(parents=True, exist_ok=True)
                write_regret_csv(csv_path, regret_summary(logs, dist, mc, kind, cumulative))
                group["regret"][label] = str(csv_path.relative_to(out))
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest


def cmd_bench(args) -> int:
    bench(args.suite, args.out, args.jobs, args.budget, args.seeds, args.mc, args.cumulative)
    return EXIT_OK


def plotdata(bench_dir, out_dir) -> list[Path]:
    bench_dir, out_dir = Path(bench_dir), Path(out_dir)
    manifest_path = bench_dir / "manifest.json"
    if not manifest_path.exists():
        raise FileNotFoundError(manifest_path)
    manifest = json.loads(manifest_path.read_text())
    written = []
    for group in manifest["groups"]:
        for r in group["runs"]:
            path = bench_dir / r["log"]
            if not path.exists():
                raise FileNotFoundError(path)
            _, records = read_log(path)
            K = len(records[0]["y"]) if records else 0
            dest = out_dir / "scatter" / group["name"] / r["method"] / f"seed{r['seed']}.csv"
            dest.parent.mkdir(parents=True, exist_ok=True)
            with open(dest, "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(["t"] + [f"y{k + 1}" for k in range(K)])
                for rec in records:
                    w.writerow([rec["t"]] + [repr(float(v)) for v in rec["y"]])
            written.append(dest)
        for label, rel in sorted(group.get("regret", {}).items()):
            src = bench_dir / rel
            if not src.exists():
                raise FileNotFoundError(src)
            data = read_regret_csv(src)
            dest = out_dir / "curves" / group["name"] / f"{label}.csv"
            dest.parent.mkdir(parents=True, exist_ok=True)
            with open(dest, "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(CSV_COLUMNS)
                for i in range(len(data["T"])):
                    w.writerow([int(data["T"][i])] + [repr(float(data[c][i])) for c in CSV_COLUMNS[1:]])
            written.append(dest)
    return written


def cmd_plotdata(args) -> int:
    files = plotdata(args.bench_dir, args.out)
    log.info("wrote %d files under %s", len(files), args.out)
    return EXIT_OK


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="mobo", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("run", help="run one experiment from a JSON config")
    p.add_argument("config")
    p.add_argument("--out", help="log path (default: config output_path, else <config>.log.jsonl)")
    p.add_argument("--resume", action="store_true", help="continue an existing log")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("regret", help="regret CSV from one or more run logs")
    p.add_argument("logs", nargs="*")
    p.add_argument("--weights", help="weight distribution (JSON text or file); default: from the logs")
    p.add_argument("--mc", type=int, default=DEFAULT_MC, help="Monte-Carlo weight draws for the SR proxy")
    p.add_argument("--kind", choices=("linear", "tch"), help="scalarization (default: from the logs)")
    p.add_argument("--no-cumulative", action="store_true", help="skip the cumulative regret oracle")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_regret)

    p = sub.add_parser("bench", help="run a benchmark suite with baselines")
    p.add_argument("suite")
    p.add_argument("--out", required=True)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--budget", type=int, help="override T for every run")
    p.add_argument("--seeds", type=int, default=5)
    p.add_argument("--mc", type=int, default=DEFAULT_MC)
    p.add_argument("--cumulative", action="store_true", help="also compute cumulative regret (slow)")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("plotdata", help="scatter and regret-curve CSVs from a bench directory")
    p.add_argument("bench_dir")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_plotdata)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.func(args)
    except (NoOracleError, FileNotFoundError) as exc:
        print(f"mobo: {exc}", file=sys.stderr)
        return EXIT_NO_ORACLE
    except (ConfigError, LogError, ContractError) as exc:
        print(f"mobo: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ObjectiveError, NumericalError) as exc:
        print(f"mobo: failure: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
