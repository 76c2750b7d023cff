import numpy as np
import pytest

from mvbranch.branching import InitialCondition, MassStatistics, SimGrid, simulate_ensemble
from mvbranch.coefficients import Scenario
from mvbranch.functionals import CylinderFunctional, QuadraticOuter, make_test_function, mass_functional
from mvbranch.harness import (
    ReplicaPolicy,
    WeakErrorRow,
    WeakErrorTable,
    battery_report,
    fit_rate,
    holder_constant,
    mass_growth_check,
    run_battery,
    system_values,
    time_continuity_check,
    weak_error_study,
)
from mvbranch.lifted import simulate_lifted_self
from mvbranch.measures import PointMeasure


def table(ns, bias_fn, stderr=1e-6, ref_se=0.0):
    return WeakErrorTable([WeakErrorRow(n, 100, 1.0 + bias_fn(n), stderr, 1.0, ref_se) for n in ns])


def test_replica_policy():
    p = ReplicaPolicy()
    assert p(8) == 64 and p(16) == 256 and p(1) == 2
    assert ReplicaPolicy(cap=1000)(1024) == 1000


def test_fit_rate_recovers_exact_power_laws():
    ns = [8, 16, 32, 64]
    f = fit_rate(table(ns, lambda n: 4.0 / n))
    assert f.slope == pytest.approx(-1.0, abs=1e-10)
    assert f.intercept == pytest.approx(np.log(4.0), abs=1e-10)
    assert f.conclusive and f.points == 4
    g = fit_rate(table(ns, lambda n: n ** -0.5))
    assert g.slope == pytest.approx(-0.5, abs=1e-10)
    lo, hi = g.interval
    assert lo == pytest.approx(-0.5, abs=1e-9) and hi == pytest.approx(-0.5, abs=1e-9)


def test_fit_rate_inconclusive_cases():
    # all biases buried in noise
    f = fit_rate(table([8, 16, 32], lambda n: 1e-4 / n, stderr=1e-3))
    assert not f.conclusive and np.isnan(f.slope)
    # two signal rows: slope reported but not conclusive
    g = fit_rate(table([8, 16], lambda n: 1.0 / n))
    assert not g.conclusive and g.slope == pytest.approx(-1.0)
    # reference noise larger than a third of the smallest resolved bias
    h = fit_rate(table([8, 16, 32], lambda n: 1.0 / n, ref_se=0.02))
    assert not h.conclusive and "reference" in h.reason
    assert fit_rate(table([8, 16, 32], lambda n: 1.0 / n, ref_se=0.02), budget=False).conclusive


def test_weak_error_table_csv():
    t = table([16, 8], lambda n: 1.0 / n)
    lines = t.to_csv("config_sha256=abc seed=1").splitlines()
    assert lines[0] == "# config_sha256=abc seed=1"
    assert lines[1] == "N,R,mean,stderr,reference,reference_stderr,bias,signal"
    assert lines[2].startswith("8,") and lines[3].startswith("16,")


def test_system_values_match_per_replica_measures():
    co = Scenario("mean-field").build()
    ens = simulate_ensemble(4, co, InitialCondition(2), SimGrid(0.5, 1 / 8), seed=3, replicas=5)
    G = CylinderFunctional((make_test_function({"name": "tanh-coordinate"}),), QuadraticOuter(((1.0,),)))
    v = system_values(G, ens)
    for r in range(5):
        assert v[r] == pytest.approx(G(ens.measure(r, ens.grid.n_steps)), abs=1e-12)


def test_weak_error_study_is_deterministic_and_worker_independent():
    sc = Scenario("mean-field")
    G = mass_functional()
    args = (sc, G, [2, 4], 6, InitialCondition(1), SimGrid(0.5, 1 / 8))
    a = weak_error_study(*args, Mp=256, seed=4)
    b = weak_error_study(*args, Mp=256, seed=4, workers=2)
    assert a.to_csv() == b.to_csv()
    assert [r.R for r in a.rows] == [6, 6]
    c = weak_error_study(*args, seed=4, reference=(1.5, 0.0))
    assert all(r.reference == 1.5 for r in c.rows)


def test_weak_error_study_pure_death_mass_reference_is_exact():
    sc = Scenario("pure-death")
    t = weak_error_study(sc, mass_functional(), [4], 50, InitialCondition(2), SimGrid(1.0, 1 / 16), seed=1)
    r = t.rows[0]
    assert r.reference == pytest.approx(2 * np.exp(-0.5), rel=1e-12) and r.reference_stderr == 0.0
    assert abs(r.mean - r.reference) < 4 * r.stderr


def test_mass_growth_check_examples():
    times = np.array([0.0, 0.5, 1.0])
    ok = MassStatistics(times, np.array([1.0, 1.2, 1.4]), np.zeros(3), np.zeros(3), 10)
    assert mass_growth_check(ok, 0.5, 1.0).passed
    bad = MassStatistics(times, np.array([1.0, 3.0, 3.1]), np.zeros(3), np.zeros(3), 10)
    res = mass_growth_check(bad, 0.5, 1.0)
    assert not res.passed and res.worst_pair == (0.0, 0.5)
    noisy = MassStatistics(times, np.array([1.0, 1.5, 1.6]), np.zeros(3), np.array([0.0, 0.1, 0.1]), 10)
    assert mass_growth_check(noisy, 0.5, 1.0).passed


def test_time_continuity_examples():
    grid = SimGrid(1.0, 0.25)
    frozen = [PointMeasure([[0.0]], [1.0])] * 5
    r = time_continuity_check(frozen, grid, 1.0, gaps=(0.0, 0.25, 1.0))
    assert r.quotients == (0.0, 0.0, 0.0) and r.passed
    assert time_continuity_check(frozen, grid, 1.0).gaps == (0.25,)
    moving = [PointMeasure([[0.1 * j]], [1.0]) for j in range(5)]
    r = time_continuity_check(moving, grid, 0.1, gaps=(0.25, 1.0))
    assert r.quotients == pytest.approx((0.1 / 0.5, 0.4 / 1.0))
    assert not r.passed and r.max_quotient == pytest.approx(0.4)


def test_holder_constant_covers_lifted_flow():
    for family in ("constant", "binary-branching", "pure-death", "mean-field"):
        co = Scenario(family).build()
        grid = SimGrid(1.0, 1 / 64)
        flow = simulate_lifted_self(2048, co, InitialCondition(1), grid, seed=2, record="all")
        C = holder_constant(co, 1.0, 1.0)
        assert time_continuity_check(flow, grid, C).passed


def test_battery_quick_run():
    res = run_battery(Scenario("binary-branching"), InitialCondition(1), horizon=0.5, dt=1 / 16, N=4,
                      replicas=100, Mp=512, seed=1, n_pairs=20)
    names = [r.name for r in res]
    assert "mass-growth" in names and "metric-sandwich" in names
    assert any(n.startswith("fokker-planck") for n in names)
    assert any(n.startswith("ito-martingale") for n in names)
    assert any(n.startswith("holder-continuity") for n in names)
    report = battery_report(res, "h").splitlines()
    assert report[1] == "check,passed,value,threshold,detail" and len(report) == 2 + len(res)
    structural = {r.name: r for r in res}
    assert structural["mass-growth"].passed and structural["metric-sandwich"].passed
