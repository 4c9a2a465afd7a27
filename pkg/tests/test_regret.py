import math

import numpy as np
import pytest

from mobo.acq_opt import OptBudget
from mobo.errors import ContractError, LogError
from mobo.objectives import ObjectiveSet, circle_pair, random_gp_objectives
from mobo.regret import (
    ObjectiveNormalizer,
    RegretOracle,
    RegretReport,
    aggregate_reports,
    bayes_regret_estimate,
    build_report,
    cumulative_regret,
    oracle_max,
    read_regret_csv,
    simple_regret_proxy,
    write_regret_csv,
)
from mobo.scalarize import scalarize
from mobo.weights import Fixed, FlatDirichlet

SMALL = OptBudget(2000, local_refine_evals=200)


def circle_grid_max(lam, n=1001):
    g = np.linspace(0, 1, n)
    U, V = np.meshgrid(g, g)
    return float(np.max(lam[0] * U * V + lam[1] * V * np.sqrt(1 - U * U)))


def loop_records(X, lams):
    return [{"t": i, "phase": "loop", "x": list(x), "y": [0.0, 0.0], "lambda": list(l)} for i, (x, l) in enumerate(zip(X, lams))]


def test_oracle_circle_linear():
    lam = np.array([0.5, 0.5])
    val = oracle_max(circle_pair(), lam, "linear")
    assert val == pytest.approx(math.sqrt(2) / 2, abs=1e-4)
    assert val == pytest.approx(circle_grid_max(lam), abs=1e-4)


def test_oracle_single_objective_and_constant():
    one = ObjectiveSet("quad", 1, 2, lambda X: (-(X - 0.3) ** 2).sum(axis=1, keepdims=True), 0.0, [[-2.0, 0.0]])
    assert oracle_max(one, [1.0], "linear") == pytest.approx(1.0, abs=1e-6)  # normalized top of the range
    const = ObjectiveSet("const", 2, 2, lambda X: np.tile([0.25, 0.75], (len(X), 1)), 0.0, [[0.0, 1.0], [0.0, 1.0]])
    assert oracle_max(const, [0.4, 0.6], "linear") == pytest.approx(0.4 * 0.25 + 0.6 * 0.75, abs=1e-15)
    assert oracle_max(const, [0.4, 0.6], "tch") == pytest.approx(min(0.4 * 0.25, 0.6 * 0.75), abs=1e-15)


def test_oracle_not_below_probe():
    obj = random_gp_objectives(2, 2, seed=3, noise_scale=0)
    oracle = RegretOracle(obj, budget=SMALL)
    for lam in ([0.2, 0.8], [0.7, 0.3]):
        for kind in ("linear", "tch"):
            probe = float(np.max(scalarize(kind, lam, oracle.probe.T)))
            assert oracle.max(np.array(lam), kind) >= probe - 1e-3


def test_zero_regret_at_argmax():
    s = 1 / math.sqrt(2)
    lams = [[0.5, 0.5]] * 4
    X = [[s, 1.0]] * 4
    inst, cum = cumulative_regret(loop_records(X, lams), RegretOracle(circle_pair()), "linear")
    assert abs(cum[-1]) <= 1e-6
    assert np.all(inst >= 0)


def test_three_step_circle_sum_of_gaps():
    lam = [0.5, 0.5]
    X = [[0.1, 0.2], [0.5, 0.9], [0.9, 0.4]]
    inst, cum = cumulative_regret(loop_records(X, [lam] * 3), RegretOracle(circle_pair()), "linear")
    best = math.sqrt(2) / 2
    gaps = [best - 0.5 * (x * y + y * math.sqrt(1 - x * x)) for x, y in X]
    np.testing.assert_allclose(inst, gaps, atol=1e-6)
    assert cum[-1] == pytest.approx(sum(gaps), abs=1e-6)
    np.testing.assert_allclose(cum, np.cumsum(inst), atol=1e-12)


def test_single_objective_textbook_regret():
    obj = ObjectiveSet("peak", 1, 1, lambda X: np.exp(-((X - 0.6) ** 2) / 0.02), 0.0, [[0.0, 1.0]])
    X = [[0.1], [0.5], [0.6], [0.9]]
    inst, _ = cumulative_regret(loop_records(X, [[1.0]] * 4), RegretOracle(obj), "linear")
    f = obj.evaluate(np.array(X))[:, 0]
    np.testing.assert_allclose(inst, 1.0 - f, atol=1e-6)


def test_missing_lambda_is_malformed():
    recs = loop_records([[0.1, 0.1]], [[0.5, 0.5]])
    recs[0]["lambda"] = None
    with pytest.raises(LogError):
        cumulative_regret(recs, RegretOracle(circle_pair()), "linear")


def test_sr_proxy_single_point_constant():
    vals = np.array([[0.3, 0.8]])
    curve = simple_regret_proxy(vals, FlatDirichlet(2), 500, "linear", rng=1)
    rng = np.random.default_rng(1)
    lams = np.array([FlatDirichlet(2).sample(rng) for _ in range(500)])
    assert curve.shape == (1,)
    assert curve[0] == pytest.approx(-(lams @ vals[0]).mean(), abs=1e-12)


def test_sr_proxy_monotone_and_append():
    rng = np.random.default_rng(0)
    vals = rng.uniform(size=(40, 3))
    curve = simple_regret_proxy(vals, FlatDirichlet(3), 100, "tch", rng=5)
    assert np.all(np.diff(curve) <= 0)
    longer = simple_regret_proxy(np.vstack([vals, rng.uniform(size=(1, 3))]), FlatDirichlet(3), 100, "tch", rng=5)
    np.testing.assert_array_equal(longer[:40], curve)
    assert longer[40] <= curve[39]


def test_sr_proxy_two_points_against_dense_monte_carlo():
    vals = np.array([[0.9, 0.2], [0.3, 0.7]])
    curve = simple_regret_proxy(vals, FlatDirichlet(2), 10_000, "linear", rng=2)
    # independent oracle: 10^6 draws of Dir(1,1), i.e. lambda_1 ~ U(0,1)
    a = np.random.default_rng(99).uniform(size=1_000_000)
    g = np.maximum(a * 0.9 + (1 - a) * 0.2, a * 0.3 + (1 - a) * 0.7)
    assert curve[-1] == pytest.approx(-g.mean(), abs=0.005)


def test_sr_proxy_needs_draws():
    with pytest.raises(ContractError):
        simple_regret_proxy(np.zeros((2, 2)), FlatDirichlet(2), 0, "linear")


def test_fixed_lambda_relation_between_cumulative_and_simple():
    # with a single fixed weight, R_T / T >= max-gap-at-best, i.e. the simple regret
    obj = circle_pair()
    oracle = RegretOracle(obj)
    rng = np.random.default_rng(4)
    X = rng.uniform(size=(15, 2))
    lam = [0.3, 0.7]
    inst, cum = cumulative_regret(loop_records(X, [lam] * 15), oracle, "linear")
    sr = simple_regret_proxy(oracle.values(X), Fixed(tuple(lam)), 1, "linear")
    best = oracle.max(np.array(lam), "linear")
    T = np.arange(1, 16)
    assert np.all(cum / T >= (best + sr) - 1e-9)


def _report(cum, sr, key="k"):
    cum = np.asarray(cum, dtype=float)
    return RegretReport(np.diff(cum, prepend=0.0), cum, np.asarray(sr, dtype=float), 10, [0], key)


def test_aggregation_arithmetic():
    reps = [_report([1, 2, 3], [-1, -2, -2]), _report([3, 4, 5], [-3, -3, -4])]
    s = bayes_regret_estimate(reps)
    np.testing.assert_allclose(s.cum_regret_mean, [2, 3, 4])
    np.testing.assert_allclose(s.cum_regret_std, [1, 1, 1])
    np.testing.assert_allclose(s.cum_regret_over_T, [2, 1.5, 4 / 3])
    np.testing.assert_allclose(s.sr_proxy_mean, [-2, -2.5, -3])


def test_aggregation_identical_and_zero_runs():
    s = bayes_regret_estimate([_report([0, 0], [-1, -1])] * 2)
    np.testing.assert_array_equal(s.cum_regret_mean, [0, 0])
    np.testing.assert_array_equal(s.cum_regret_std, [0, 0])
    rng = np.random.default_rng(0)
    runs = [np.cumsum(rng.uniform(size=6)) for _ in range(5)]
    s = aggregate_reports([_report(r, -r) for r in runs])
    np.testing.assert_allclose(s.cum_regret_mean, sum(runs) / 5, rtol=1e-15)


def test_aggregation_refuses_mismatch():
    with pytest.raises(LogError):
        aggregate_reports([_report([1], [-1], "a"), _report([1], [-1], "b")])
    with pytest.raises(ContractError):
        bayes_regret_estimate([_report([1], [-1])])


def test_normalizer():
    n = ObjectiveNormalizer([0.0, -2.0], [1.0, 2.0])
    np.testing.assert_allclose(n.normalize([[0.5, 0.0]]), [[0.5, 0.5]])
    with pytest.raises(ContractError):
        ObjectiveNormalizer([1.0], [1.0])
    obj = random_gp_objectives(2, 2, seed=1, noise_scale=0)
    probe_norm = ObjectiveNormalizer.from_objective(obj)
    again = ObjectiveNormalizer.from_objective(obj)
    np.testing.assert_array_equal(probe_norm.lo, again.lo)
    v = RegretOracle(obj, probe_norm, budget=SMALL).probe
    assert v.min() >= 0 and v.max() <= 1


def test_build_report_and_csv(tmp_path):
    obj = circle_pair()
    rng = np.random.default_rng(0)
    init = [{"t": i, "phase": "init", "x": list(x), "y": [0, 0], "lambda": None} for i, x in enumerate(rng.uniform(size=(3, 2)))]
    loop = loop_records(rng.uniform(size=(5, 2)), [[0.5, 0.5]] * 5)
    for i, r in enumerate(loop):
        r["t"] = 3 + i
    cfg = {"acquisition": {"scalarization": "linear"}, "seed": 0}
    rep = build_report(cfg, init + loop, obj, FlatDirichlet(2), 50, rng=1)
    assert len(rep.sr_proxy) == 5 and len(rep.cumulative) == 5
    s = aggregate_reports([rep])
    assert np.all(s.sr_proxy_std == 0)
    path = tmp_path / "r.csv"
    write_regret_csv(path, s)
    back = read_regret_csv(path)
    np.testing.assert_array_equal(back["sr_proxy_mean"], s.sr_proxy_mean)
    np.testing.assert_array_equal(back["T"], [1, 2, 3, 4, 5])
