import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mvbranch.measures import PointMeasure
from mvbranch.metrics import (
    ProblemTooLarge,
    bounded_lipschitz,
    bounded_lipschitz_dual,
    brute_force_bl,
    coarsen,
    extended_w1,
    truncated_w1,
)


def dirac(x, w=1.0):
    return PointMeasure([np.atleast_1d(x)], [w])


def random_measure(rng, n, d, spread=2.0, wmax=1.5):
    return PointMeasure(rng.uniform(-spread, spread, size=(n, d)), rng.uniform(0.05, wmax, size=n), d=d)


@st.composite
def measures(draw, max_atoms=3, d=1):
    n = draw(st.integers(0, max_atoms))
    xs = [[draw(st.floats(-3, 3)) for _ in range(d)] for _ in range(n)]
    ws = [draw(st.floats(0.01, 2)) for _ in range(n)]
    return PointMeasure(np.array(xs).reshape(n, d), ws, d=d)


# ---------------------------------------------------------------- closed forms

@pytest.mark.parametrize("x,y", [(0.0, 0.3), (0.0, 1.0), (-1.0, 0.7), (0.0, 2.0), (0.0, 3.0), (5.0, -5.0)])
def test_two_diracs(x, y):
    assert bounded_lipschitz(dirac(x), dirac(y)) == pytest.approx(min(abs(x - y), 2.0), abs=1e-9)


def test_mass_gap_and_identity():
    assert bounded_lipschitz(dirac(0.4, 2.0), dirac(0.4)) == pytest.approx(1.0, abs=1e-9)
    mu = random_measure(np.random.default_rng(0), 6, 2)
    assert bounded_lipschitz(mu, mu) == 0.0
    assert bounded_lipschitz(PointMeasure.empty(), PointMeasure.empty()) == 0.0


def test_euclidean_norm_in_two_dimensions():
    assert bounded_lipschitz(dirac([0.0, 0.0]), dirac([0.3, 0.4])) == pytest.approx(0.5, abs=1e-9)


def test_extended_w1_examples():
    mu = random_measure(np.random.default_rng(1), 5, 1)
    assert extended_w1(mu, mu) == pytest.approx(0.0, abs=1e-12)
    assert extended_w1(dirac(0.3), PointMeasure.empty()) == pytest.approx(1.0)
    assert extended_w1(dirac(0.0), dirac(0.25)) == pytest.approx(0.25)
    assert extended_w1(dirac(0.0, 2.0), dirac(0.0)) == pytest.approx(1.0)


# ---------------------------------------------------------------- oracle

def test_brute_force_examples():
    assert brute_force_bl(dirac(0.2), dirac(0.2)) == 0.0
    assert brute_force_bl(dirac(0.0), dirac(1.0)) == pytest.approx(1.0, abs=1e-3)
    assert brute_force_bl(dirac(0.0, 2.0), dirac(0.0)) == pytest.approx(1.0, abs=1e-3)
    with pytest.raises(ProblemTooLarge):
        brute_force_bl(random_measure(np.random.default_rng(2), 3, 1), random_measure(np.random.default_rng(3), 3, 1))


@pytest.mark.parametrize("seed", range(40))
def test_lp_matches_oracle_on_small_instances(seed):
    rng = np.random.default_rng(seed)
    d = 1 + seed % 2
    n1 = int(rng.integers(1, 4))
    n2 = int(rng.integers(0, 5 - n1))
    mu, nu = random_measure(rng, n1, d), random_measure(rng, n2, d)
    lp = bounded_lipschitz(mu, nu)
    bf = brute_force_bl(mu, nu, resolution=1e-3)
    assert bf <= lp + 1e-9
    assert lp - bf <= 2e-3


# ---------------------------------------------------------------- metric properties

@settings(max_examples=60, deadline=None)
@given(measures(6), measures(6), measures(6))
def test_metric_axioms(a, b, c):
    ab, ba = bounded_lipschitz(a, b), bounded_lipschitz(b, a)
    assert ab == pytest.approx(ba, abs=1e-10)
    assert bounded_lipschitz(a, c) <= ab + bounded_lipschitz(b, c) + 1e-9
    assert bounded_lipschitz(a, a) == 0.0


@settings(max_examples=60, deadline=None)
@given(measures(4, d=2), measures(4, d=2))
def test_dual_witness_is_feasible_and_optimal(a, b):
    sol = bounded_lipschitz_dual(a, b)
    f, p = sol.f, sol.points
    assert np.all(np.abs(f) <= 1 + 1e-9)
    D = np.linalg.norm(p[:, None, :] - p[None, :, :], axis=2)
    assert np.all(np.abs(f[:, None] - f[None, :]) <= D + 1e-9)
    assert float(np.dot(sol.signed_weights, f)) == pytest.approx(sol.value, abs=1e-9)


@settings(max_examples=60, deadline=None)
@given(measures(4), measures(4))
def test_sandwich(a, b):
    d, w = bounded_lipschitz(a, b), extended_w1(a, b)
    assert 0.5 * d <= w + 1e-9
    assert w <= 2 * d + 1e-9


@pytest.mark.parametrize("seed", range(10))
def test_agrees_with_classical_w1_for_close_equal_mass_measures(seed):
    rng = np.random.default_rng(100 + seed)
    d = 1 + seed % 2
    mu = random_measure(rng, 4, d, spread=0.2)
    nu = random_measure(rng, 3, d, spread=0.2)
    nu = nu.scaled(float(mu.weights.sum() / nu.weights.sum()))
    assert bounded_lipschitz(mu, nu) == pytest.approx(truncated_w1(mu, nu), abs=1e-9)


# ---------------------------------------------------------------- coarsening

def test_coarsening_bound_is_certified():
    rng = np.random.default_rng(7)
    mu, nu = random_measure(rng, 300, 1), random_measure(rng, 250, 1)
    exact = bounded_lipschitz(mu, nu)
    for r in (0.01, 0.05, 0.2):
        sol = bounded_lipschitz_dual(mu, nu, radius=r)
        assert abs(sol.value - exact) <= sol.error_bound + 1e-9
    cm, bound = coarsen(mu, 0.1)
    assert cm.weights.sum() == pytest.approx(mu.weights.sum())
    assert bounded_lipschitz(cm, mu) <= bound + 1e-9


def test_large_support_in_two_dimensions_raises_or_solves():
    rng = np.random.default_rng(8)
    mu, nu = random_measure(rng, 40, 2), random_measure(rng, 40, 2)
    with pytest.raises(ProblemTooLarge):
        bounded_lipschitz_dual(mu, nu, max_rows=100)
    assert bounded_lipschitz_dual(mu, nu).value > 0


def anchored_w1(mu, nu, anchor):
    """W1 with the cemetery at distance min(|x - anchor|, 1) + 1 from every real point."""
    from mvbranch.metrics import _transport

    m1, m2 = mu.weights.sum(), nu.weights.sum()
    m = max(m1, m2)
    a, b = np.append(mu.weights, m - m1), np.append(nu.weights, m - m2)
    c = np.zeros((len(a), len(b)))
    c[:-1, :-1] = np.minimum(np.linalg.norm(mu.locations[:, None] - nu.locations[None], axis=2), 1.0)
    c[:-1, -1] = np.minimum(np.linalg.norm(mu.locations - anchor, axis=1), 1.0) + 1.0
    c[-1, :-1] = np.minimum(np.linalg.norm(nu.locations - anchor, axis=1), 1.0) + 1.0
    return _transport(a, b, c)


@pytest.mark.parametrize("seed", range(10))
def test_cemetery_anchor_is_irrelevant_for_equal_masses(seed):
    rng = np.random.default_rng(300 + seed)
    mu, nu = random_measure(rng, 4, 1), random_measure(rng, 3, 1)
    nu = nu.scaled(float(mu.weights.sum() / nu.weights.sum()))
    base = extended_w1(mu, nu)
    for anchor in (-3.0, 0.0, 0.7, 10.0):
        assert anchored_w1(mu, nu, np.array([anchor])) == pytest.approx(base, abs=1e-9)
    # with a mass gap the anchored cost only adds to the unit cemetery cost
    light = nu.scaled(0.5)
    assert anchored_w1(mu, light, np.array([0.0])) >= extended_w1(mu, light) - 1e-9
