import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mvbranch.measures import (
    EvaluationError,
    InvalidPerturbation,
    Label,
    Particle,
    PointMeasure,
    Population,
    add_atom,
    mass,
    measure_from_csv,
    measure_to_csv,
    moment,
    pair,
    population_distance,
    population_to_measure,
)


def x1(x):
    return x[:, 0]


def one(x):
    return np.ones(len(x))


def pop(entries):
    return Population(Particle(Label(tuple(k)), pos) for k, pos in entries)


# ---------------------------------------------------------------- labels and populations

def test_label_concat_and_root_identity():
    a, b = Label((1, 2)), Label((3,))
    assert a.concat(b) == Label((1, 2, 3))
    assert Label().concat(a) == a and a.concat(Label()) == a


def test_label_ancestor_is_strict_prefix():
    assert Label((1,)).is_ancestor_of(Label((1, 2)))
    assert not Label((1, 2)).is_ancestor_of(Label((1, 2)))
    assert not Label((2,)).is_ancestor_of(Label((1, 2)))
    assert str(Label((1, 2))) == "1.2" and Label.parse("") == Label()


def test_population_rejects_ancestor_pairs_and_duplicates():
    with pytest.raises(ValueError):
        pop([((1,), (0.0,)), ((1, 1), (0.0,))])
    with pytest.raises(ValueError):
        pop([((1,), (0.0,)), ((1,), (1.0,))])


# ---------------------------------------------------------------- pairings

def test_pair_examples():
    assert pair(one, PointMeasure([[0.3]], [2.0])) == 2.0
    assert pair(x1, PointMeasure.empty(2)) == 0.0
    mu = PointMeasure([[1.0, 0.0], [3.0, 0.0]], [0.5, 0.25])
    assert pair(x1, mu) == pytest.approx(1.25, abs=1e-15)


def test_pair_reports_bad_atom():
    mu = PointMeasure([[1.0], [0.0]], [1.0, 1.0])
    with pytest.raises(EvaluationError, match="atom 1"):
        pair(lambda x: np.where(x[:, 0] == 0, np.nan, x[:, 0]), mu)


def test_mass_and_moment_examples():
    assert mass(PointMeasure.empty()) == 0.0
    assert mass(PointMeasure([[0.0], [0.0]], [1.0, 1.0])) == 2.0
    assert moment(PointMeasure.empty(), 2) == 0.0
    assert moment(PointMeasure([[2.0, 0.0]], [3.0]), 2) == pytest.approx(12.0)
    assert moment(PointMeasure([[1.0, 1.0]], [1.0]), 1) == pytest.approx(np.sqrt(2))
    with pytest.raises(ValueError):
        moment(PointMeasure.empty(), 0.5)


def test_negative_weights_rejected():
    with pytest.raises(ValueError):
        PointMeasure([[0.0]], [-1.0])


atoms = st.lists(st.tuples(st.floats(-5, 5), st.floats(0, 3)), min_size=0, max_size=8)


def _measure(a):
    return PointMeasure([[x] for x, _ in a], [w for _, w in a], d=1)


@given(atoms, st.floats(-3, 3), st.floats(-2, 2), st.floats(0.1, 2))
def test_pair_is_linear_in_f(a, k, c, s):
    mu = _measure(a)
    f = lambda x: np.sin(s * x[:, 0])
    g = lambda x: c * x[:, 0] ** 2
    lhs = pair(lambda x: k * f(x) + g(x), mu)
    rhs = k * pair(f, mu) + pair(g, mu)
    assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-12)


@given(atoms)
def test_aggregation_preserves_pairings(a):
    a = a + a[:2]
    mu = _measure(a)
    f = lambda x: np.cos(x[:, 0])
    assert pair(f, mu.aggregated()) == pytest.approx(pair(f, mu), rel=1e-12, abs=1e-12)


# ---------------------------------------------------------------- empirical measures

def test_population_to_measure_examples():
    assert len(population_to_measure([], 0.5)) == 0
    three = pop([((1,), (0.0,)), ((2,), (1.0,)), ((3,), (2.0,))])
    assert mass(population_to_measure([three], 1 / 3)) == pytest.approx(1.0)
    two = pop([((1,), (0.0,)), ((2,), (1.0,))])
    four = pop([((k,), (float(k),)) for k in range(1, 5)])
    assert mass(population_to_measure([two, four], 0.5)) == pytest.approx(3.0)


@given(st.permutations(range(6)), st.integers(0, 100))
def test_population_to_measure_permutation_invariant(perm, seed):
    rng = np.random.default_rng(seed)
    pops = [pop([((k + 1,), (float(rng.normal()),)) for k in range(n)]) for n in (1, 2, 0, 3, 1, 2)]
    f = lambda x: np.tanh(x[:, 0]) + x[:, 0] ** 2
    base = pair(f, population_to_measure(pops, 1 / 6))
    shuffled = pair(f, population_to_measure([pops[i] for i in perm], 1 / 6))
    assert shuffled == pytest.approx(base, rel=1e-12, abs=1e-12)


# ---------------------------------------------------------------- population metric

def test_population_distance_examples():
    e = pop([((1,), (0.0,)), ((2,), (3.0,))])
    assert population_distance(e, e) == 0.0
    assert population_distance(pop([((1,), (0.0,))]), pop([((1,), (5.0,))])) == 1.0
    a = pop([((1,), (0.0,)), ((2,), (0.0,))])
    b = pop([((3,), (0.0,)), ((4,), (0.0,)), ((5,), (0.0,))])
    assert population_distance(a, b) == 5.0


label_pool = [(1,), (2,), (3,), (1, 1), (1, 2), (2, 1)]


@st.composite
def populations(draw):
    chosen = []
    for lab in draw(st.permutations(label_pool)):
        if draw(st.booleans()) and not any(Label(c).is_ancestor_of(Label(lab)) or Label(lab).is_ancestor_of(Label(c))
                                          for c in chosen):
            chosen.append(lab)
    return pop([(lab, (draw(st.floats(-3, 3)),)) for lab in chosen])


@settings(max_examples=200)
@given(populations(), populations(), populations())
def test_population_distance_metric_axioms(a, b, c):
    assert population_distance(a, b) == population_distance(b, a)
    assert population_distance(a, c) <= population_distance(a, b) + population_distance(b, c) + 1e-12
    assert population_distance(a, a) == 0.0
    if population_distance(a, b) == 0.0:
        assert a.labels == b.labels


# ---------------------------------------------------------------- perturbations

def test_add_atom_examples():
    assert mass(add_atom(PointMeasure.empty(), [0.0], 1.0)) == 1.0
    assert mass(add_atom(PointMeasure([[0.0]], [1.0]), [0.0], -1.0)) == 0.0
    mu = add_atom(PointMeasure([[0.0]], [1.0]), [2.0], 0.5)
    assert pair(x1, mu) == pytest.approx(1.0)


def test_add_atom_negative_needs_mass_at_point():
    with pytest.raises(InvalidPerturbation):
        add_atom(PointMeasure([[0.0]], [1.0]), [1.0], -0.5)
    with pytest.raises(InvalidPerturbation):
        add_atom(PointMeasure([[0.0]], [1.0]), [0.0], -1.5)


@given(atoms, st.floats(-5, 5), st.floats(0.01, 3))
def test_add_then_remove_restores_pairings(a, x, w):
    mu = _measure(a)
    f = lambda y: np.exp(-y[:, 0] ** 2) + y[:, 0]
    nu = add_atom(mu, [x], w)
    assert pair(f, nu) - pair(f, mu) == pytest.approx(w * f(np.array([[x]]))[0], abs=1e-12)
    back = add_atom(nu, [x], -w)
    assert pair(f, back) == pytest.approx(pair(f, mu), rel=1e-12, abs=1e-12)


# ---------------------------------------------------------------- serialization

def test_csv_round_trip_is_exact():
    rng = np.random.default_rng(3)
    mu = PointMeasure(rng.normal(size=(7, 2)), rng.uniform(size=7))
    text = measure_to_csv(mu, "config_sha256=abc seed=1")
    assert text.splitlines()[1] == "x1,x2,weight"
    back = measure_from_csv(text)
    assert np.array_equal(back.locations, mu.locations) and np.array_equal(back.weights, mu.weights)


def test_csv_requires_header():
    with pytest.raises(ValueError):
        measure_from_csv("0.0,1.0\n")
