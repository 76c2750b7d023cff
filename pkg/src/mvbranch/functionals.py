"""Cylinder functionals, their measure derivatives, and residual diagnostics.

A cylinder functional is G(t, mu) = phi(t, <f_1, mu>, ..., <f_m, mu>) with
bounded smooth inner functions f_j.  Its derivatives are explicit:

    dG/dmu(mu, x)          = sum_j phi_j f_j(x)
    d2G/dmu2(mu, x, y)     = sum_jk phi_jk f_j(x) f_k(y)
    D_mu G(mu, x)          = sum_j phi_j grad f_j(x)
    tr(D2_mu G(mu, x, x) a) = sum_jk phi_jk grad f_j(x)^T a grad f_k(x)

with phi_j, phi_jk evaluated at the pairing vector.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import rng
from .branching import EnsembleResult, SimGrid
from .coefficients import CoefficientSet
from .lifted import ReferenceFlow, WeightedEnsemble, lift_Phi, simulate_lifted_self
from .measures import PointMeasure

__all__ = [
    "TestFunction",
    "make_test_function",
    "TEST_FUNCTIONS",
    "OuterFunction",
    "LinearOuter",
    "QuadraticOuter",
    "CylinderFunctional",
    "mass_functional",
    "make_functional",
    "product",
    "exp_time",
    "ContractError",
    "eval_G",
    "flat_derivative_G",
    "second_flat_derivative_G",
    "intrinsic_derivative_G",
    "fp_residual",
    "ito_drift_environment",
    "ito_residual_empirical",
    "ItoResidual",
    "LiftedSettings",
    "value_function_U",
    "flow_constancy_check",
    "FlowConstancy",
]


class ContractError(ValueError):
    """Input lacks data the operation needs (derivatives, event log, ...)."""


# ---------------------------------------------------------------- inner test functions

@dataclass(frozen=True)
class TestFunction:
    """Scalar function on R^d with gradient, Hessian and optional time dependence.

    Callables take ``(t, x)`` with x of shape (n, d) and return arrays of shape
    (n,), (n, d) and (n, d, d).  ``sup``, ``lip`` and ``hess_bound`` are
    declared bounds (``inf`` when unbounded).
    """

    __test__ = False  # keep pytest from collecting this class

    name: str
    value: Callable
    grad: Callable | None = None
    hess: Callable | None = None
    dtime: Callable | None = None
    sup: float = np.inf
    lip: float = np.inf
    hess_bound: float = np.inf

    def __call__(self, x, t: float = 0.0):
        return self.value(t, np.atleast_2d(x))

    def has_derivatives(self) -> bool:
        return self.grad is not None and self.hess is not None

    def time_derivative(self, t, x):
        if self.dtime is None:
            return np.zeros(x.shape[0])
        return self.dtime(t, x)


class _Const:
    def __init__(self, c):
        self.c = float(c)

    def value(self, t, x):
        return np.full(x.shape[0], self.c)

    def grad(self, t, x):
        return np.zeros_like(x)

    def hess(self, t, x):
        return np.zeros(x.shape + (x.shape[1],))


class _Bump:
    def __init__(self, center, width):
        self.c = np.asarray(center, dtype=float)
        self.w2 = float(width) ** 2

    def value(self, t, x):
        return np.exp(-np.sum((x - self.c) ** 2, axis=1) / (2 * self.w2))

    def grad(self, t, x):
        return -(x - self.c) / self.w2 * self.value(t, x)[:, None]

    def hess(self, t, x):
        r = (x - self.c) / self.w2
        d = x.shape[1]
        return self.value(t, x)[:, None, None] * (r[:, :, None] * r[:, None, :] - np.eye(d) / self.w2)


class _TanhCoord:
    def __init__(self, i, scale):
        self.i, self.s = int(i), float(scale)

    def value(self, t, x):
        return np.tanh(self.s * x[:, self.i])

    def grad(self, t, x):
        g = np.zeros_like(x)
        g[:, self.i] = self.s * (1 - np.tanh(self.s * x[:, self.i]) ** 2)
        return g

    def hess(self, t, x):
        h = np.zeros(x.shape + (x.shape[1],))
        th = np.tanh(self.s * x[:, self.i])
        h[:, self.i, self.i] = -2 * self.s ** 2 * th * (1 - th ** 2)
        return h


class _LinearCoord:
    def __init__(self, i):
        self.i = int(i)

    def value(self, t, x):
        return x[:, self.i].copy()

    def grad(self, t, x):
        g = np.zeros_like(x)
        g[:, self.i] = 1.0
        return g

    def hess(self, t, x):
        return np.zeros(x.shape + (x.shape[1],))


class _Product:
    def __init__(self, f, g):
        self.f, self.g = f, g

    def value(self, t, x):
        return self.f.value(t, x) * self.g.value(t, x)

    def grad(self, t, x):
        return self.f.grad(t, x) * self.g.value(t, x)[:, None] + self.g.grad(t, x) * self.f.value(t, x)[:, None]

    def hess(self, t, x):
        fv, gv = self.f.value(t, x), self.g.value(t, x)
        fg, gg = self.f.grad(t, x), self.g.grad(t, x)
        cross = fg[:, :, None] * gg[:, None, :]
        return (self.f.hess(t, x) * gv[:, None, None] + self.g.hess(t, x) * fv[:, None, None]
                + cross + np.swapaxes(cross, 1, 2))

    def dtime(self, t, x):
        return self.f.time_derivative(t, x) * self.g.value(t, x) + self.g.time_derivative(t, x) * self.f.value(t, x)


class _ExpTime:
    """e^{rate t} f(x)."""

    def __init__(self, f, rate):
        self.f, self.r = f, float(rate)

    def value(self, t, x):
        return np.exp(self.r * t) * self.f.value(t, x)

    def grad(self, t, x):
        return np.exp(self.r * t) * self.f.grad(t, x)

    def hess(self, t, x):
        return np.exp(self.r * t) * self.f.hess(t, x)

    def dtime(self, t, x):
        return self.r * self.value(t, x)


def _wrap(name, impl, sup, lip, hb):
    return TestFunction(name, impl.value, impl.grad, impl.hess, getattr(impl, "dtime", None), sup, lip, hb)


def _tf_constant(value=1.0):
    return _wrap("constant", _Const(value), abs(value), 0.0, 0.0)


def _tf_bump(center=0.0, width=1.0, dim=1):
    c = np.broadcast_to(np.asarray(center, dtype=float), (dim,))
    w = float(width)
    return _wrap("gaussian-bump", _Bump(c, w), 1.0, np.exp(-0.5) / w, 2.0 / w ** 2)


def _tf_tanh(coordinate=0, scale=1.0):
    s = abs(float(scale))
    return _wrap("tanh-coordinate", _TanhCoord(coordinate, scale), 1.0, s, 4 * s ** 2 / (3 * np.sqrt(3)))


def _tf_linear(coordinate=0):
    return _wrap("linear-coordinate", _LinearCoord(coordinate), np.inf, 1.0, 0.0)


TEST_FUNCTIONS = {
    "constant": _tf_constant,
    "gaussian-bump": _tf_bump,
    "tanh-coordinate": _tf_tanh,
    "linear-coordinate": _tf_linear,
}


def product(f: TestFunction, g: TestFunction) -> TestFunction:
    impl = _Product(f, g)
    lip = f.sup * g.lip + g.sup * f.lip
    hb = f.hess_bound * g.sup + g.hess_bound * f.sup + 2 * f.lip * g.lip
    return TestFunction(f"{f.name}*{g.name}", impl.value, impl.grad, impl.hess, impl.dtime, f.sup * g.sup, lip, hb)


def exp_time(f: TestFunction, rate: float) -> TestFunction:
    """The time-dependent function e^{rate t} f(x)."""
    impl = _ExpTime(f, rate)
    return TestFunction(f"exp({rate}t)*{f.name}", impl.value, impl.grad, impl.hess, impl.dtime, f.sup, f.lip, f.hess_bound)


def make_test_function(spec: dict, dim: int = 1) -> TestFunction:
    """Build a catalog function from ``{"name": ..., **params}``; products use
    ``{"name": "product", "factors": [spec, spec, ...]}``."""
    spec = dict(spec)
    name = spec.pop("name")
    if name == "product":
        factors = [make_test_function(s, dim) for s in spec.pop("factors")]
        if spec or len(factors) < 2:
            raise ValueError("product takes a 'factors' list of at least two functions")
        out = factors[0]
        for f in factors[1:]:
            out = product(out, f)
        return out
    if name not in TEST_FUNCTIONS:
        raise ValueError(f"unknown test function {name!r}; known: {sorted(TEST_FUNCTIONS) + ['product']}")
    if name == "gaussian-bump":
        spec.setdefault("dim", dim)
    try:
        return TEST_FUNCTIONS[name](**spec)
    except TypeError as exc:
        raise ValueError(f"bad parameters for {name!r}: {exc}") from None


# ---------------------------------------------------------------- outer functions

class OuterFunction:
    """phi(t, u) on R^m, vectorized over leading axes of u."""

    def value(self, t, u):
        raise NotImplementedError

    def grad(self, t, u):
        raise NotImplementedError

    def hess(self, t, u):
        raise NotImplementedError

    def dtime(self, t, u):
        return np.zeros(np.shape(u)[:-1])


@dataclass(frozen=True)
class LinearOuter(OuterFunction):
    """phi(t, u) = const + rate * t + coef . u"""

    coef: tuple
    const: float = 0.0
    rate: float = 0.0

    def value(self, t, u):
        return self.const + self.rate * t + np.asarray(u) @ np.asarray(self.coef, dtype=float)

    def grad(self, t, u):
        return np.broadcast_to(np.asarray(self.coef, dtype=float), np.shape(u)).copy()

    def hess(self, t, u):
        m = len(self.coef)
        return np.zeros(np.shape(u) + (m,))

    def dtime(self, t, u):
        return np.full(np.shape(u)[:-1], float(self.rate))


@dataclass(frozen=True)
class QuadraticOuter(OuterFunction):
    """phi(u) = 1/2 u^T A u + c . u with symmetric A."""

    A: tuple
    c: tuple | None = None

    def _A(self):
        return np.asarray(self.A, dtype=float)

    def _c(self):
        m = self._A().shape[0]
        return np.zeros(m) if self.c is None else np.asarray(self.c, dtype=float)

    def value(self, t, u):
        u = np.asarray(u, dtype=float)
        return 0.5 * np.einsum("...i,ij,...j->...", u, self._A(), u) + u @ self._c()

    def grad(self, t, u):
        return np.asarray(u, dtype=float) @ self._A() + self._c()

    def hess(self, t, u):
        return np.broadcast_to(self._A(), np.shape(u) + (self._A().shape[0],)).copy()


@dataclass(frozen=True)
class CylinderFunctional:
    """G(t, mu) = phi(t, <f_1, mu>, ..., <f_m, mu>)."""

    inner: tuple
    outer: OuterFunction
    name: str = "G"

    def __post_init__(self):
        object.__setattr__(self, "inner", tuple(self.inner))

    @property
    def m(self) -> int:
        return len(self.inner)

    def pairings(self, mu: PointMeasure, t: float = 0.0) -> np.ndarray:
        if len(mu) == 0:
            return np.zeros(self.m)
        return np.array([np.dot(mu.weights, f.value(t, mu.locations)) for f in self.inner])

    def inner_values(self, x, t=0.0) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return np.stack([f.value(t, x) for f in self.inner], axis=-1)

    def __call__(self, mu: PointMeasure, t: float = 0.0) -> float:
        return eval_G(self, mu, t)


def mass_functional() -> CylinderFunctional:
    return CylinderFunctional((_tf_constant(1.0),), LinearOuter((1.0,)), "mass")


def eval_G(G: CylinderFunctional, mu: PointMeasure, t: float = 0.0) -> float:
    return float(G.outer.value(t, G.pairings(mu, t)))


def flat_derivative_G(G: CylinderFunctional, mu: PointMeasure, x, t: float = 0.0) -> float:
    g = G.outer.grad(t, G.pairings(mu, t))
    return float(G.inner_values(x, t)[0] @ g)


def second_flat_derivative_G(G: CylinderFunctional, mu: PointMeasure, x, y, t: float = 0.0) -> float:
    H = G.outer.hess(t, G.pairings(mu, t))
    return float(G.inner_values(x, t)[0] @ H @ G.inner_values(y, t)[0])


def intrinsic_derivative_G(G: CylinderFunctional, mu: PointMeasure, x, t: float = 0.0) -> np.ndarray:
    """Spatial gradient of the flat derivative at x."""
    g = G.outer.grad(t, G.pairings(mu, t))
    x = np.atleast_2d(np.asarray(x, dtype=float))
    return sum(g[j] * _need(f, "grad")(t, x)[0] for j, f in enumerate(G.inner))


def _need(f: TestFunction, what: str):
    fn = getattr(f, what)
    if fn is None:
        raise ContractError(f"test function {f.name!r} has no {what} data")
    return fn


def _generator_terms(G, t, x, b, a):
    """Per particle: L f_j(x) for every inner function (shape (n, m)) and the
    matrix grad f_j^T a grad f_k (shape (n, m, m))."""
    grads = np.stack([_need(f, "grad")(t, x) for f in G.inner], axis=1)  # (n, m, d)
    hess = np.stack([_need(f, "hess")(t, x) for f in G.inner], axis=1)  # (n, m, d, d)
    Lf = np.einsum("nmd,nd->nm", grads, b) + 0.5 * np.einsum("nmij,nij->nm", hess, a)
    gag = np.einsum("nji,nik,nlk->njl", grads, a, grads)
    return Lf, gag


# ---------------------------------------------------------------- environment identities

def _coeff_eval(coeffs: CoefficientSet, t, x, mu: PointMeasure):
    m = np.broadcast_to(coeffs.feature_values(mu), (x.shape[0], coeffs.n_features))
    b = coeffs.drift(t, x, m)
    sig = coeffs.diffusion(t, x, m)
    a = np.einsum("nij,nkj->nik", sig, sig)
    return b, a, coeffs.growth(t, x, m), m


def fp_residual(f: TestFunction, flow: ReferenceFlow, coeffs: CoefficientSet) -> float:
    """<f_T, mu_T> - <f_0, mu_0> - sum_j dt <d_t f + L f + c f, mu_{t_j}> along a flow."""
    if not f.has_derivatives():
        raise ContractError(f"test function {f.name!r} lacks gradient or Hessian data")
    grid = flow.grid
    if flow.steps != list(range(grid.n_steps + 1)):
        raise ContractError("flow must record every grid step")
    total = 0.0
    for j in range(grid.n_steps):
        mu = flow.measures[j]
        t = grid.time(j)
        x = mu.locations
        if len(x) == 0:
            continue
        b, a, c, _ = _coeff_eval(coeffs, t, x, mu)
        val = f.value(t, x)
        Lf = np.einsum("nd,nd->n", f.grad(t, x), b) + 0.5 * np.einsum("nij,nij->n", f.hess(t, x), a)
        total += grid.dt * float(np.dot(mu.weights, f.time_derivative(t, x) + Lf + c * val))
    first, last = flow.measures[0], flow.measures[-1]
    end = float(np.dot(last.weights, f.value(grid.horizon, last.locations))) if len(last) else 0.0
    start = float(np.dot(first.weights, f.value(grid.start, first.locations))) if len(first) else 0.0
    return end - start - total


def ito_drift_environment(F: CylinderFunctional, t: float, mu: PointMeasure, coeffs: CoefficientSet) -> float:
    """d_t F + <L dF/dmu + c dF/dmu, mu>: the time derivative of F along the mean-field flow."""
    u = F.pairings(mu, t)
    dt_phi = float(F.outer.dtime(t, u))
    inner_dt = np.array([np.dot(mu.weights, f.time_derivative(t, mu.locations)) for f in F.inner]) if len(mu) else 0.0
    g = F.outer.grad(t, u)
    dt_total = dt_phi + float(np.dot(g, inner_dt))
    if len(mu) == 0:
        return dt_total
    x = mu.locations
    b, a, c, _ = _coeff_eval(coeffs, t, x, mu)
    Lf, _ = _generator_terms(F, t, x, b, a)
    vals = F.inner_values(x, t)
    per_atom = (Lf + c[:, None] * vals) @ g
    return dt_total + float(np.dot(mu.weights, per_atom))


@dataclass(frozen=True)
class ItoResidual:
    """Per-system residuals of the empirical Ito formula with summary statistics."""

    per_run: np.ndarray
    mean: float
    stderr: float

    @property
    def zscore(self) -> float:
        if self.stderr == 0:
            return 0.0 if self.mean == 0 else np.inf
        return self.mean / self.stderr


def _system_pairings(F, t, x, sys, R, N):
    vals = F.inner_values(x, t) if len(x) else np.zeros((0, F.m))
    u = np.stack([np.bincount(sys, weights=vals[:, j], minlength=R) for j in range(F.m)], axis=1) / N
    return u, vals


def ito_residual_empirical(F: CylinderFunctional, traj, coeffs: CoefficientSet) -> ItoResidual:
    """Residual F(T, mu_T^N) - F(0, mu_0^N) - sum_j dt [drift + trace + jump] per system.

    The drift is <L dF/dmu, mu^N> (the branching term is carried by the jump
    compensator), the trace term is (1/2N) <tr(D2 F(x, x) a), mu^N> and the jump
    compensator is N <gamma sum_l p_l (F(mu + (l-1)/N delta_x) - F(mu)), mu^N>,
    all frozen at the left grid point.  ``traj`` is an
    :class:`~mvbranch.branching.EnsembleResult` (every step recorded, genealogy
    tracked) or a :class:`~mvbranch.branching.BranchingTrajectory`.
    """
    ens = _as_ensemble(traj)
    if ens.events is None:
        raise ContractError("trajectory carries no event log")
    grid, N, R = ens.grid, ens.N, ens.replicas
    if any(j not in ens.snapshots for j in range(grid.n_steps + 1)):
        raise ContractError("every grid step must be recorded")
    acc = np.zeros(R)
    for j in range(grid.n_steps):
        t = grid.time(j)
        snap = ens.snapshots[j]
        x, sys = snap.x, snap.system
        u, vals = _system_pairings(F, t, x, sys, R, N)
        up = u[sys]
        if coeffs.n_features:
            feats = np.stack([np.bincount(sys, weights=psi(x), minlength=R) for psi in coeffs.features], axis=1) / N
            m = feats[sys]
        else:
            m = np.zeros((len(x), 0))
        b = coeffs.drift(t, x, m)
        sig = coeffs.diffusion(t, x, m)
        a = np.einsum("nij,nkj->nik", sig, sig)
        Lf, gag = _generator_terms(F, t, x, b, a)
        g = F.outer.grad(t, up)  # (n, m)
        H = F.outer.hess(t, up)  # (n, m, m)
        drift = np.einsum("nm,nm->n", Lf, g) / N
        trace = np.einsum("njk,njk->n", H, gag) / (2 * N * N)
        gam = coeffs.death_rate(t, x, m)
        probs = coeffs.progeny(t, x, m)
        base = F.outer.value(t, up)
        jump = np.zeros(len(x))
        for l in range(probs.shape[1]):
            if l == 1:
                continue
            shifted = up + (l - 1) / N * vals
            jump += probs[:, l] * (F.outer.value(t, shifted) - base)
        jump *= gam
        inner_dt = np.stack([f.time_derivative(t, x) for f in F.inner], axis=1) / N
        particle = drift + trace + jump + np.einsum("nm,nm->n", g, inner_dt)
        acc += grid.dt * (np.bincount(sys, weights=particle, minlength=R) + F.outer.dtime(t, u))
    end = _functional_per_system(F, ens, grid.n_steps, grid.horizon)
    start = _functional_per_system(F, ens, 0, grid.start)
    res = end - start - acc
    se = float(res.std(ddof=1) / np.sqrt(R)) if R > 1 else 0.0
    return ItoResidual(res, float(res.mean()), se)


def _functional_per_system(F, ens, j, t):
    snap = ens.snapshots[j]
    u, _ = _system_pairings(F, t, snap.x, snap.system, ens.replicas, ens.N)
    return F.outer.value(t, u)


def _as_ensemble(traj) -> EnsembleResult:
    if isinstance(traj, EnsembleResult):
        return traj
    # a single trajectory: rebuild flat snapshots from its measures
    from .branching import Snapshot, _Events

    if traj.event_log is None:
        raise ContractError("trajectory carries no event log")
    if traj.steps != list(range(traj.grid.n_steps + 1)):
        raise ContractError("every grid step must be recorded")
    d = traj.measures[0].dim
    snaps = {}
    for j, mu in zip(traj.steps, traj.measures):
        n = len(mu)
        snaps[j] = Snapshot(np.array(mu.locations), np.zeros(n, dtype=np.int64), np.zeros(n, dtype=np.int64),
                            np.full(n, -1, dtype=np.int64), traj.N)
    ev = _Events(*(np.zeros(0) for _ in range(5)))
    return EnsembleResult(traj.grid, traj.N, 1, 0, d, np.asarray(traj.counts)[None, :], snaps, ev)


# ---------------------------------------------------------------- value function

@dataclass(frozen=True)
class LiftedSettings:
    """Lifted-solver settings for nested simulation: ensemble size, step, horizon."""

    coeffs: CoefficientSet
    Mp: int
    dt: float
    horizon: float
    seed: int = 0


def _estimate(G: CylinderFunctional, ens: WeightedEnsemble, t: float) -> tuple[float, float]:
    """G at the projected ensemble with a delta-method standard error."""
    Mp = len(ens)
    contrib = G.inner_values(ens.y, t) * ens.z[:, None]  # (Mp, m)
    u = contrib.mean(axis=0)
    g = np.asarray(G.outer.grad(t, u), dtype=float)
    cov = np.atleast_2d(np.cov(contrib, rowvar=False, ddof=1))
    se = float(np.sqrt(max(g @ cov @ g, 0.0) / Mp))
    return float(G.outer.value(t, u)), se


def value_function_U(t: float, mu: PointMeasure, G: CylinderFunctional, solver: LiftedSettings) -> tuple[float, float]:
    """Estimate U(t, mu) = G(flow at the horizon started from mu at time t).

    The measure is lifted (positions sampled from the normalized measure, all
    weights equal to its mass), run through the lifted solver and projected.
    Returns ``(estimate, stderr)``; at the horizon no simulation is performed.
    """
    T = solver.horizon
    if t > T + 1e-12:
        raise ValueError(f"t={t} is after the horizon {T}")
    if abs(t - T) <= 1e-12:
        return eval_G(G, mu, T), 0.0
    grid = SimGrid(T, solver.dt, start=t)
    flow = simulate_lifted_self(solver.Mp, solver.coeffs, lift_Phi(mu), grid, solver.seed, record="final")
    return _estimate(G, flow.final, T)


@dataclass(frozen=True)
class FlowConstancy:
    times: tuple
    values: np.ndarray
    stderrs: np.ndarray
    base_value: float
    base_stderr: float
    deviations: np.ndarray
    combined_stderr: np.ndarray

    @property
    def max_deviation(self) -> float:
        return float(self.deviations.max()) if len(self.deviations) else 0.0

    def passed(self, k: float = 3.0) -> bool:
        return bool(np.all(self.deviations <= k * self.combined_stderr))


def flow_constancy_check(
    G: CylinderFunctional, coeffs: CoefficientSet, mu0, times: Sequence[float], settings: LiftedSettings
) -> FlowConstancy:
    """Compare U(s, mu_s) along one reference flow with U(0, mu_0).

    One flow is run from time 0; at each s it is restarted from its own
    projection (lifted afresh, independent randomness) and carried to the
    horizon.  ``mu0`` is a :class:`PointMeasure` or an initial condition
    accepted by the lifted solver.
    """
    grid = SimGrid(settings.horizon, settings.dt)
    steps = [grid.index_of(s) for s in times]
    init = lift_Phi(mu0) if isinstance(mu0, PointMeasure) else mu0
    base = simulate_lifted_self(settings.Mp, coeffs, init, grid, settings.seed, record=steps)
    u0, se0 = _estimate(G, base.final, grid.horizon)
    root = rng.seed_key(settings.seed)
    vals, ses = [], []
    for k, (s, j) in enumerate(zip(times, steps)):
        if j == 0:
            vals.append(u0)
            ses.append(0.0)
            continue
        mu_s = base.measures[base.steps.index(j)]
        sub = LiftedSettings(coeffs, settings.Mp, settings.dt, settings.horizon,
                             int(rng.derive(root, rng.LIFT, k + 1)))
        v, se = value_function_U(grid.time(j), mu_s, G, sub)
        vals.append(v)
        ses.append(se)
    vals, ses = np.array(vals), np.array(ses)
    dev = np.abs(vals - u0)
    comb = np.where(np.array(steps) == 0, 0.0, np.sqrt(ses ** 2 + se0 ** 2))
    return FlowConstancy(tuple(times), vals, ses, u0, se0, dev, comb)


def make_functional(spec: dict, dim: int = 1) -> CylinderFunctional:
    """Cylinder functional from ``{"inner": [test function specs], "outer": {...}}``.

    The outer function is ``{"kind": "linear", "coef": [...], "const": c, "rate": r}``
    or ``{"kind": "quadratic", "A": [[...]], "c": [...]}``.
    """
    extra = set(spec) - {"inner", "outer", "name"}
    if extra:
        raise ValueError(f"unknown functional keys: {sorted(extra)}")
    inner = tuple(make_test_function(s, dim) for s in spec["inner"])
    outer = dict(spec["outer"])
    kind = outer.pop("kind")
    if kind == "linear":
        allowed = {"coef", "const", "rate"}
        if set(outer) - allowed:
            raise ValueError(f"unknown linear outer keys: {sorted(set(outer) - allowed)}")
        phi = LinearOuter(tuple(float(c) for c in outer["coef"]), float(outer.get("const", 0.0)),
                          float(outer.get("rate", 0.0)))
        m = len(phi.coef)
    elif kind == "quadratic":
        allowed = {"A", "c"}
        if set(outer) - allowed:
            raise ValueError(f"unknown quadratic outer keys: {sorted(set(outer) - allowed)}")
        A = np.asarray(outer["A"], dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1] or not np.allclose(A, A.T):
            raise ValueError("quadratic outer needs a symmetric square matrix A")
        c = outer.get("c")
        phi = QuadraticOuter(tuple(map(tuple, A)), None if c is None else tuple(float(v) for v in c))
        m = A.shape[0]
    else:
        raise ValueError(f"unknown outer kind {kind!r}")
    if m != len(inner):
        raise ValueError(f"outer function takes {m} arguments but {len(inner)} inner functions were given")
    return CylinderFunctional(inner, phi, spec.get("name", "G"))
