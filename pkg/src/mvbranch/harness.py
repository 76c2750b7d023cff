"""Weak-error studies, rate fits and the structural check battery."""

from __future__ import annotations

import io
from dataclasses import dataclass, field, asdict
from typing import Callable, Sequence

import numpy as np
from scipy import stats

from . import rng
from .branching import EnsembleResult, InitialCondition, SimGrid, mass_statistics, MassStatistics, simulate_ensemble
from .coefficients import CoefficientSet, Scenario
from .functionals import (
    CylinderFunctional,
    _estimate,
    ito_residual_empirical,
    make_test_function,
    mass_functional,
    QuadraticOuter,
    LinearOuter,
)
from .lifted import ReferenceFlow, simulate_lifted_self
from .measures import PointMeasure
from .metrics import bounded_lipschitz, extended_w1

__all__ = [
    "ReplicaPolicy",
    "WeakErrorRow",
    "WeakErrorTable",
    "RateFit",
    "weak_error_study",
    "fit_rate",
    "ContinuityResult",
    "time_continuity_check",
    "holder_constant",
    "MassGrowthResult",
    "mass_growth_check",
    "CheckResult",
    "run_battery",
    "system_values",
]


def _sub_seed(seed: int, *parts) -> int:
    return int(rng.derive(rng.seed_key(seed), *parts))


# ---------------------------------------------------------------- weak error

@dataclass(frozen=True)
class ReplicaPolicy:
    """R(N) = clip(round(r0 * (N / n0)^power), minimum, cap)."""

    r0: int = 64
    n0: int = 8
    power: float = 2.0
    cap: int = 100_000
    minimum: int = 2

    def __call__(self, N: int) -> int:
        r = int(round(self.r0 * (N / self.n0) ** self.power))
        return int(min(self.cap, max(self.minimum, r)))


@dataclass(frozen=True)
class WeakErrorRow:
    N: int
    R: int
    mean: float
    stderr: float
    reference: float
    reference_stderr: float

    @property
    def bias(self) -> float:
        return abs(self.reference - self.mean)

    @property
    def signal(self) -> bool:
        """True when the bias is resolved: |bias| > 3 * stderr."""
        return self.bias > 3.0 * self.stderr


@dataclass
class WeakErrorTable:
    rows: list
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.rows = sorted(self.rows, key=lambda r: r.N)

    def to_csv(self, header_comment: str | None = None) -> str:
        buf = io.StringIO()
        if header_comment:
            buf.write(f"# {header_comment}\n")
        buf.write("N,R,mean,stderr,reference,reference_stderr,bias,signal\n")
        for r in self.rows:
            buf.write(f"{r.N},{r.R},{r.mean!r},{r.stderr!r},{r.reference!r},{r.reference_stderr!r},{r.bias!r},"
                      f"{int(r.signal)}\n")
        return buf.getvalue()


def system_values(G: CylinderFunctional, ens: EnsembleResult, j: int | None = None) -> np.ndarray:
    """G evaluated at every system's empirical measure at step j (default: final)."""
    j = ens.grid.n_steps if j is None else j
    snap = ens.snapshot(j)
    t = ens.grid.time(j)
    vals = G.inner_values(snap.x, t) if len(snap.x) else np.zeros((0, G.m))
    u = np.stack([np.bincount(snap.system, weights=vals[:, k], minlength=ens.replicas) for k in range(G.m)],
                 axis=1) / ens.N
    return G.outer.value(t, u)


def weak_error_study(
    scenario: Scenario | CoefficientSet,
    G: CylinderFunctional,
    N_list: Sequence[int],
    R: int | Callable[[int], int],
    init: InitialCondition,
    grid: SimGrid,
    Mp: int | None = None,
    seed: int = 0,
    workers: int = 1,
    reference: tuple[float, float] | None = None,
) -> WeakErrorTable:
    """|G(mu_T) - E G(mu_T^N)| for each N against one shared lifted reference.

    ``R`` is a replica count or a policy N -> R.  The reference uses
    ``Mp`` (default 16 * max N) weighted particles on the same grid, unless
    a precomputed ``(value, stderr)`` pair is passed.
    """
    coeffs = scenario.build() if isinstance(scenario, Scenario) else scenario
    N_list = sorted(int(n) for n in N_list)
    policy = R if callable(R) else (lambda n, r=int(R): r)
    Mp = Mp or 16 * max(N_list)
    if reference is None:
        flow = simulate_lifted_self(Mp, coeffs, init, grid, _sub_seed(seed, 0), record="final")
        ref, ref_se = _estimate(G, flow.final, grid.horizon)
    else:
        ref, ref_se = reference
    rows = []
    for N in N_list:
        reps = policy(N)
        ens = simulate_ensemble(N, coeffs, init, grid, _sub_seed(seed, 1, N), replicas=reps, record="final",
                                workers=workers)
        v = system_values(G, ens)
        se = float(v.std(ddof=1) / np.sqrt(reps)) if reps > 1 else float("inf")
        rows.append(WeakErrorRow(N, reps, float(v.mean()), se, float(ref), float(ref_se)))
    meta = {"Mp": Mp, "dt": grid.dt, "horizon": grid.horizon, "seed": int(seed)}
    return WeakErrorTable(rows, meta)


@dataclass(frozen=True)
class RateFit:
    """Least-squares fit of log|bias| against log N over signal rows."""

    slope: float
    intercept: float
    halfwidth: float
    points: int
    conclusive: bool
    reason: str = ""

    @property
    def interval(self) -> tuple[float, float]:
        return (self.slope - self.halfwidth, self.slope + self.halfwidth)

    def as_dict(self) -> dict:
        return asdict(self)


def fit_rate(table: WeakErrorTable, min_points: int = 3, budget: bool = True) -> RateFit:
    """Fit the convergence exponent from signal-dominated rows.

    With fewer than ``min_points`` signal rows, or (``budget=True``) a reference
    stderr above a third of the smallest signal bias, the result is marked
    inconclusive; the slope is still reported when at least two rows exist.
    """
    rows = [r for r in table.rows if r.signal and r.bias > 0]
    n = len(rows)
    if n < 2:
        return RateFit(float("nan"), float("nan"), float("inf"), n, False,
                       f"only {n} signal-dominated rows (need {min_points})")
    x = np.log([r.N for r in rows])
    y = np.log([r.bias for r in rows])
    fit = stats.linregress(x, y)
    hw = float(stats.t.ppf(0.975, n - 2) * fit.stderr) if n > 2 else float("inf")
    reason = ""
    if n < min_points:
        reason = f"only {n} signal-dominated rows (need {min_points})"
    elif budget:
        ref_se = max(r.reference_stderr for r in rows)
        smallest = min(r.bias for r in rows)
        if ref_se > smallest / 3:
            reason = f"reference stderr {ref_se:.3g} exceeds a third of the smallest signal bias {smallest:.3g}"
    return RateFit(float(fit.slope), float(fit.intercept), hw, n, not reason, reason)


# ---------------------------------------------------------------- structural checks

def holder_constant(coeffs: CoefficientSet, mean_count: float, horizon: float) -> float:
    """Explicit C with d(mu_s, mu_t) <= C sqrt(s - t) on [0, horizon].

    Bounds every surviving particle's displacement by M (s-t) + M sqrt(d (s-t))
    in mean and every branching event's effect on a test pairing by l + 1,
    with the expected population at most mean_count * exp(gamma_bar M T).
    """
    B = coeffs.bounds
    T = horizon
    growth = mean_count * np.exp(B.gamma_bar * B.M * T)
    return float(growth * (B.M * np.sqrt(T) + B.M * np.sqrt(coeffs.dim) + B.gamma_bar * (B.M + 1) * np.sqrt(T)))


@dataclass(frozen=True)
class ContinuityResult:
    gaps: tuple
    quotients: tuple
    constant: float

    @property
    def max_quotient(self) -> float:
        return max(self.quotients) if self.quotients else 0.0

    @property
    def passed(self) -> bool:
        return self.max_quotient <= self.constant


def _snapshot_measure(source, j: int) -> PointMeasure:
    if isinstance(source, ReferenceFlow):
        return source.measures[source.steps.index(j)]
    if isinstance(source, EnsembleResult):
        return source.environment_estimate(j)
    return source[j]


def time_continuity_check(
    source, grid: SimGrid, constant: float, gaps: Sequence[float] | None = None, radius: float = 0.0
) -> ContinuityResult:
    """Largest quotient d(mu_{t+g}, mu_t) / sqrt(g) for each gap g, anchored at t = 0.

    Default gaps are T/4, T/16 and T/64 where they fall on the grid.
    ``source`` is a reference flow, an ensemble (its environment estimate is
    used) or a sequence of measures indexed by grid step.  Equal times give 0.
    """
    T = grid.horizon - grid.start
    if gaps is None:
        # T/4, T/16, T/64, keeping those that fall on the grid (at least one step)
        gaps = tuple(g for g in (T / 4, T / 16, T / 64) if abs(g / grid.dt - round(g / grid.dt)) < 1e-9
                     and round(g / grid.dt) >= 1) or (grid.dt,)
    qs = []
    for g in gaps:
        if g <= 0:
            qs.append(0.0)
            continue
        k = grid.index_of(grid.start + g)
        a, b = _snapshot_measure(source, 0), _snapshot_measure(source, k)
        qs.append(bounded_lipschitz(a, b, radius) / np.sqrt(g))
    return ContinuityResult(tuple(gaps), tuple(qs), float(constant))


@dataclass(frozen=True)
class MassGrowthResult:
    passed: bool
    min_margin: float
    worst_pair: tuple


def mass_growth_check(st: MassStatistics, gamma_bar: float, M: float, slack: float = 3.0) -> MassGrowthResult:
    """mean(s) <= mean(t) exp(gamma_bar M (s - t)) + slack * stderr for all t < s."""
    i, k = np.triu_indices(len(st.times), k=1)
    if not i.size:
        return MassGrowthResult(True, float("inf"), ())
    bound = st.mean[i] * np.exp(gamma_bar * M * (st.times[k] - st.times[i]))
    tol = slack * np.sqrt(st.stderr[i] ** 2 + st.stderr[k] ** 2)
    margin = bound + tol - st.mean[k]
    w = int(np.argmin(margin))
    return MassGrowthResult(bool(margin[w] >= 0), float(margin[w]), (float(st.times[i[w]]), float(st.times[k[w]])))


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    value: float
    threshold: float
    detail: str = ""


def _fp_parts(f, flow: ReferenceFlow, coeffs: CoefficientSet) -> tuple[float, float]:
    """Residual of the weak Fokker-Planck identity with a per-particle stderr."""
    grid = flow.grid
    Mp = flow.Mp
    acc = np.zeros(Mp)
    from .functionals import _coeff_eval

    for j in range(grid.n_steps):
        mu = flow.measures[j]
        t = grid.time(j)
        x = mu.locations
        b, a, c, _ = _coeff_eval(coeffs, t, x, mu)
        Lf = np.einsum("nd,nd->n", f.grad(t, x), b) + 0.5 * np.einsum("nij,nij->n", f.hess(t, x), a)
        acc += grid.dt * mu.weights * (f.time_derivative(t, x) + Lf + c * f.value(t, x))
    first, last = flow.measures[0], flow.measures[-1]
    per = last.weights * f.value(grid.horizon, last.locations) - first.weights * f.value(grid.start, first.locations) - acc
    return float(per.sum()), float(per.std(ddof=1) * np.sqrt(Mp))


def _battery_functionals(dim: int):
    bump = make_test_function({"name": "gaussian-bump", "center": 0.5, "width": 1.0}, dim)
    one = make_test_function({"name": "constant"}, dim)
    th = make_test_function({"name": "tanh-coordinate"}, dim)
    return {
        "mass": mass_functional(),
        "bump-times-mass": CylinderFunctional((bump, one), QuadraticOuter(((0.0, 1.0), (1.0, 0.0))), "bump-times-mass"),
        "half-squared-bump": CylinderFunctional((bump,), QuadraticOuter(((1.0,),)), "half-squared-bump"),
        "tanh-pairing": CylinderFunctional((th,), LinearOuter((1.0,)), "tanh-pairing"),
    }


def run_battery(
    scenario: Scenario,
    init: InitialCondition,
    horizon: float = 1.0,
    dt: float = 1 / 64,
    N: int = 8,
    replicas: int = 500,
    Mp: int = 4096,
    seed: int = 0,
    workers: int = 1,
    n_pairs: int = 200,
) -> list[CheckResult]:
    """Structural checks with closed-form or statistical oracles.

    Items: weak Fokker-Planck residuals along the lifted flow, empirical Ito
    residual means, the mass growth bound, Hölder-1/2 continuity of both the
    lifted flow and the ensemble environment estimate, and the
    bounded-Lipschitz / extended-W1 sandwich on random measure pairs.
    """
    coeffs = scenario.build()
    B = coeffs.bounds
    grid = SimGrid(horizon, dt)
    out = []

    flow = simulate_lifted_self(Mp, coeffs, init, grid, _sub_seed(seed, 10), record="all")
    fine = simulate_lifted_self(Mp, coeffs, init, grid.refined(2), _sub_seed(seed, 10), record="all")
    for name, spec in (("constant", {"name": "constant"}), ("gaussian-bump", {"name": "gaussian-bump", "center": 0.5})):
        f = make_test_function(spec, coeffs.dim)
        r1, _ = _fp_parts(f, flow, coeffs)
        r2, se2 = _fp_parts(f, fine, coeffs)
        # what remains after halving is bounded by the observed O(dt) change
        thr = 3 * se2 + 2 * abs(r1 - r2)
        out.append(CheckResult(f"fokker-planck[{name}]", abs(r2) <= thr, abs(r2), thr,
                               f"residual dt={grid.dt / 2:g}: {r2:.3e}, dt={grid.dt:g}: {r1:.3e}"))

    ens = simulate_ensemble(N, coeffs, init, grid, _sub_seed(seed, 11), replicas=replicas, record="all",
                            track_genealogy=True, workers=workers)
    for name, F in _battery_functionals(coeffs.dim).items():
        res = ito_residual_empirical(F, ens, coeffs)
        thr = 3 * res.stderr
        out.append(CheckResult(f"ito-martingale[{name}]", abs(res.mean) <= thr or res.stderr == 0 and res.mean == 0,
                               abs(res.mean), thr, f"mean {res.mean:.3e} stderr {res.stderr:.3e}"))

    st = mass_statistics(ens)
    mg = mass_growth_check(st, B.gamma_bar, B.M)
    out.append(CheckResult("mass-growth", mg.passed, mg.min_margin, 0.0, f"tightest pair {mg.worst_pair}"))

    C = holder_constant(coeffs, float(init.count), horizon)
    for label, src in (("lifted", flow), ("ensemble", ens)):
        tc = time_continuity_check(src, grid, C)
        out.append(CheckResult(f"holder-continuity[{label}]", tc.passed, tc.max_quotient, C,
                               "quotients " + ", ".join(f"{q:.3g}" for q in tc.quotients)))

    viol, worst = _sandwich_pairs(n_pairs, coeffs.dim, _sub_seed(seed, 12))
    out.append(CheckResult("metric-sandwich", viol == 0, float(viol), 0.0, f"worst slack {worst:.3e}"))
    return out


def random_measure(key, n_atoms: int, dim: int, spread: float = 1.5) -> PointMeasure:
    z = rng.normal_vectors(rng.derive(key, rng.INIT, np.arange(n_atoms)), dim)
    w = 0.05 + rng.uniform(rng.derive(key, rng.COUNT, np.arange(n_atoms)))
    return PointMeasure(spread * z, w, d=dim)


def _sandwich_pairs(n: int, dim: int, seed: int) -> tuple[int, float]:
    """Count violations of d/2 <= W1_ext <= 2d on random pairs; return the tightest slack."""
    root = rng.seed_key(seed)
    viol, worst = 0, np.inf
    for k in range(n):
        key = rng.derive(root, k)
        na, nb = 1 + int(rng.uniform(rng.derive(key, 1)) * 6), int(rng.uniform(rng.derive(key, 2)) * 7)
        mu = random_measure(rng.derive(key, 3), na, dim)
        nu = random_measure(rng.derive(key, 4), nb, dim)
        d = bounded_lipschitz(mu, nu)
        w = extended_w1(mu, nu)
        lo, hi = w - 0.5 * d, 2 * d - w
        worst = min(worst, lo, hi)
        if lo < -1e-9 or hi < -1e-9:
            viol += 1
    return viol, float(worst)


def battery_report(results: Sequence[CheckResult], header_comment: str | None = None) -> str:
    buf = io.StringIO()
    if header_comment:
        buf.write(f"# {header_comment}\n")
    buf.write("check,passed,value,threshold,detail\n")
    for r in results:
        detail = r.detail.replace(",", ";")
        buf.write(f"{r.name},{int(r.passed)},{r.value!r},{r.threshold!r},{detail}\n")
    return buf.getvalue()
