"""End-to-end acceptance suite: one test per criterion, each printing a PASS/FAIL line."""

import json
import time

import numpy as np
import pytest

from mvbranch.branching import InitialCondition, SimGrid, mass_statistics, simulate_ensemble
from mvbranch.cli import main
from mvbranch.coefficients import SCENARIO_FAMILIES, Scenario
from mvbranch.functionals import (
    CylinderFunctional,
    LiftedSettings,
    QuadraticOuter,
    flow_constancy_check,
    ito_residual_empirical,
    make_functional,
    make_test_function,
    mass_functional,
)
from mvbranch.harness import ReplicaPolicy, fit_rate, run_battery, weak_error_study
from mvbranch.lifted import simulate_lifted_self
from mvbranch.measures import PointMeasure
from mvbranch.metrics import bounded_lipschitz, bounded_lipschitz_dual, brute_force_bl, extended_w1


def report(log, number, title, passed, detail, started):
    log(f"[criterion {number}] {'PASS' if passed else 'FAIL'} {title}: {detail} ({time.perf_counter() - started:.1f} s)")


def test_1_mass_ode_oracle(acceptance_report):
    t0 = time.perf_counter()
    co = Scenario("pure-death").build()
    ens = simulate_ensemble(256, co, InitialCondition(4), SimGrid(1.0, 1 / 32), seed=1, replicas=2000, record="final")
    st = mass_statistics(ens)
    mean, se = st.mean[-1] / 256, st.stderr[-1] / 256
    target = 4 * np.exp(-0.5)
    ok = abs(mean - target) <= 3 * se
    report(acceptance_report, 1, "mass ODE oracle", ok, f"mean {mean:.5f} +- {se:.5f} vs {target:.5f}", t0)
    assert ok


def test_2_lifted_and_branching_agree(acceptance_report):
    t0 = time.perf_counter()
    co = Scenario("mean-field").build()
    init, grid = InitialCondition(2), SimGrid(1.0, 1 / 256)
    ref = simulate_lifted_self(8192, co, init, grid, seed=42, record="final")
    ens = simulate_ensemble(512, co, init, grid, seed=43, replicas=64, record="final")
    sol = bounded_lipschitz_dual(ref.terminal, ens.environment_estimate(grid.n_steps), radius=0.002)
    # the coarsened distance is certified only up to its error bound
    worst = sol.value + sol.error_bound
    ok = worst <= 0.05
    report(acceptance_report, 2, "lifted vs branching environment", ok,
           f"d = {sol.value:.4f} (+ coarsening bound {sol.error_bound:.4f}) <= 0.05", t0)
    assert ok


@pytest.mark.long
def test_3_weak_rate_slope(acceptance_report):
    t0 = time.perf_counter()
    G = make_functional({"inner": [{"name": "tanh-coordinate"}], "outer": {"kind": "quadratic", "A": [[2.0]]}}, 1)
    table = weak_error_study(Scenario("mean-field"), G, [8, 16, 32, 64, 128, 256], ReplicaPolicy(),
                             InitialCondition(2, mean=0.5), SimGrid(1.0, 1 / 32), Mp=1 << 22, seed=5)
    fit = fit_rate(table)
    lo, hi = fit.interval
    ok = fit.conclusive and fit.points >= 4 and -1.4 <= fit.slope <= -0.6 and hi < -0.5
    print("\n" + table.to_csv())
    report(acceptance_report, 3, "weak-rate slope", ok,
           f"slope {fit.slope:.3f}, 95% CI [{lo:.3f}, {hi:.3f}], {fit.points} signal rows{' (' + fit.reason + ')' if fit.reason else ''}", t0)
    assert ok


def test_4_metric_exactness(acceptance_report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    worst = 0.0
    for k in range(500):
        d = 1 + k % 2
        n1 = int(rng.integers(1, 4))
        n2 = int(rng.integers(0, 5 - n1))
        mu = PointMeasure(rng.uniform(-2, 2, (n1, d)), rng.uniform(0.05, 1.5, n1), d=d)
        nu = PointMeasure(rng.uniform(-2, 2, (n2, d)), rng.uniform(0.05, 1.5, n2), d=d)
        worst = max(worst, abs(bounded_lipschitz(mu, nu) - brute_force_bl(mu, nu, resolution=1e-3)))
    closed = 0.0
    for x, y in [(0.0, 0.3), (0.0, 1.7), (-1.0, 1.5), (2.0, -3.0)]:
        dxy = bounded_lipschitz(PointMeasure([[x]], [1.0]), PointMeasure([[y]], [1.0]))
        closed = max(closed, abs(dxy - min(abs(x - y), 2.0)))
    closed = max(closed, abs(bounded_lipschitz(PointMeasure([[0.4]], [2.0]), PointMeasure([[0.4]], [1.0])) - 1.0))
    ok = worst <= 2e-3 and closed <= 1e-9
    report(acceptance_report, 4, "metric exactness", ok, f"max oracle gap {worst:.2e}, max closed-form error {closed:.1e}", t0)
    assert ok


def test_5_equivalence_sandwich(acceptance_report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(77)
    viol = 0
    for k in range(1000):
        d = 1 + k % 2
        n1, n2 = int(rng.integers(0, 7)), int(rng.integers(0, 7))
        mu = PointMeasure(rng.normal(scale=1.5, size=(n1, d)), rng.uniform(0.05, 2.0, n1), d=d)
        nu = PointMeasure(rng.normal(scale=1.5, size=(n2, d)), rng.uniform(0.05, 2.0, n2), d=d)
        dist, w = bounded_lipschitz(mu, nu), extended_w1(mu, nu)
        if not (0.5 * dist <= w + 1e-9 and w <= 2 * dist + 1e-9):
            viol += 1
    ok = viol == 0
    report(acceptance_report, 5, "equivalence sandwich", ok, f"{viol} violations in 1000 pairs", t0)
    assert ok


def _ito_functionals():
    bump = make_test_function({"name": "gaussian-bump", "center": 0.5, "width": 1.0})
    one = make_test_function({"name": "constant"})
    return {
        "mass": mass_functional(),
        "bump-times-mass": CylinderFunctional((bump, one), QuadraticOuter(((0.0, 1.0), (1.0, 0.0)))),
        "half-squared-bump": CylinderFunctional((bump,), QuadraticOuter(((1.0,),))),
    }


def test_6_ito_martingale(acceptance_report):
    t0 = time.perf_counter()
    lines, ok = [], True
    for family in sorted(SCENARIO_FAMILIES):
        co = Scenario(family).build()
        runs = {}
        for dt in (1 / 16, 1 / 32, 1 / 64):
            ens = simulate_ensemble(8, co, InitialCondition(2), SimGrid(1.0, dt), seed=6, replicas=500, record="all",
                                    track_genealogy=True, brownian="fine", fine_steps=64)
            runs[dt] = {name: ito_residual_empirical(F, ens, co) for name, F in _ito_functionals().items()}
        for name in _ito_functionals():
            r16, r32, r64 = (runs[dt][name] for dt in (1 / 16, 1 / 32, 1 / 64))
            mean_ok = abs(r64.mean) <= 3 * r64.stderr or (r64.stderr == 0 and r64.mean == 0)
            d1 = np.mean(np.abs(r16.per_run - r32.per_run))
            d2 = np.mean(np.abs(r32.per_run - r64.per_run))
            if d1 == 0 and d2 == 0:
                ratio, halving_ok = float("nan"), True  # the residual vanishes identically
            else:
                ratio = d1 / d2
                halving_ok = 2 * 0.7 <= ratio <= 2 * 1.3
            ok &= mean_ok and halving_ok
            lines.append(f"{family}/{name}: z={r64.zscore:+.2f} halving ratio {ratio:.2f}")
    report(acceptance_report, 6, "Ito martingale", ok, "; ".join(lines), t0)
    assert ok


def test_7_flow_constancy(acceptance_report):
    t0 = time.perf_counter()
    co = Scenario("binary-branching").build()
    G = make_functional({"inner": [{"name": "gaussian-bump", "center": 0.5, "width": 1.0}],
                         "outer": {"kind": "linear", "coef": [1.0]}})
    T = 1.0
    fc = flow_constancy_check(G, co, InitialCondition(2), [T / 4, T / 2, 3 * T / 4],
                              LiftedSettings(co, 1 << 16, 1 / 32, T, seed=7))
    ok = fc.passed(3.0)
    ratios = ", ".join(f"{d / s:.2f}" for d, s in zip(fc.deviations, fc.combined_stderr))
    report(acceptance_report, 7, "flow constancy of U", ok, f"max deviation {fc.max_deviation:.2e}; deviation/stderr {ratios}", t0)
    assert ok


def test_8_mass_growth_and_holder_continuity(acceptance_report):
    t0 = time.perf_counter()
    lines, ok = [], True
    for family in sorted(SCENARIO_FAMILIES):
        res = {r.name: r for r in run_battery(Scenario(family), InitialCondition(1), horizon=1.0, dt=1 / 64, N=8,
                                              replicas=500, Mp=4096, seed=8, n_pairs=0)}
        keys = ["mass-growth", "holder-continuity[lifted]", "holder-continuity[ensemble]"]
        passed = all(res[k].passed for k in keys)
        ok &= passed
        lines.append(f"{family}: " + ", ".join(f"{k} {res[k].value:.3g}/{res[k].threshold:.3g}" for k in keys))
    report(acceptance_report, 8, "mass growth and Hoelder continuity", ok, "; ".join(lines), t0)
    assert ok


def test_9_determinism_across_worker_counts(tmp_path, acceptance_report):
    t0 = time.perf_counter()
    (tmp_path / "m1.csv").write_text("x1,weight\n0,1\n1,2\n")
    (tmp_path / "m2.csv").write_text("x1,weight\n0.5,1\n")
    cfg = {
        "scenario": {"family": "mean-field"},
        "init": {"count": 2},
        "grid": {"horizon": 1.0, "dt": 0.0625},
        "seed": 11,
        "simulate": {"N": 8, "replicas": 4},
        "reference": {"Mp": 1024, "method": "picard", "iterations": 3},
        "study": {"N_list": [4, 8, 16], "replicas": {"r0": 100, "n0": 4, "cap": 1000}},
        "check": {"N": 4, "replicas": 100, "Mp": 1024, "pairs": 20},
        "value": {"Mp": 1024},
        "distance": {"mu": str(tmp_path / "m1.csv"), "nu": str(tmp_path / "m2.csv"), "witness": True},
    }
    path = tmp_path / "run.json"
    path.write_text(json.dumps(cfg))
    mismatched = []
    for sub in ("simulate", "reference", "distance", "convergence", "check", "value"):
        outs = []
        for workers in (1, 3):
            out = tmp_path / f"{sub}-{workers}"
            assert main([sub, "--config", str(path), "--workers", str(workers), "--out", str(out)]) in (0, 1)
            outs.append({p.name: p.read_bytes() for p in sorted(out.iterdir())})
        if outs[0] != outs[1] or not outs[0]:
            mismatched.append(sub)
    ok = not mismatched
    report(acceptance_report, 9, "determinism", ok, f"byte-identical artifacts for all subcommands; mismatches: {mismatched or 'none'}", t0)
    assert ok
