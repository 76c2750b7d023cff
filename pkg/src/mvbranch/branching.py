"""Interacting branching particle systems.

A *system* consists of N populations, each started from an i.i.d. initial
configuration and evolving as a branching diffusion.  The populations interact
through the empirical measure mu^N = (1/N) sum_i sum_k delta_{X^{i,k}}.

Spatial motion uses Euler-Maruyama with coefficients frozen at the left grid
point.  Branching is simulated exactly in the candidate process: every
lineage carries a rate-gamma_bar exponential clock, a candidate at time s is
accepted when ``U * gamma_bar < gamma(s, X_s, mu)``, and an accepted particle
is replaced by ``l`` children at its current position.  Between grid points
the particle position at a candidate time is obtained from a Brownian bridge
pinned to the same increment used for the full Euler step.

Many independent systems are advanced together as flat arrays.  All random
draws are keyed by (seed, system, population, lineage, counter), so results do
not depend on how systems are batched or on the number of worker processes.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.stats import poisson

from . import rng
from .coefficients import CoefficientSet, progeny_from_uniform
from .measures import Label, Particle, PointMeasure, Population, population_to_measure, measure_to_csv

__all__ = [
    "SimGrid",
    "InitialCondition",
    "PopulationExplosion",
    "NumericsError",
    "Snapshot",
    "EnsembleResult",
    "BranchingTrajectory",
    "MassStatistics",
    "simulate_ensemble",
    "simulate_branching",
    "mass_statistics",
]


class PopulationExplosion(RuntimeError):
    """A system exceeded the hard particle cap."""

    def __init__(self, time: float, system: int, size: int, cap: int):
        super().__init__(f"system {system} reached {size} particles (cap {cap}) at t={time:.6g}")
        self.time = time
        self.system = system
        self.size = size


class NumericsError(FloatingPointError):
    """Non-finite particle state."""


@dataclass(frozen=True)
class SimGrid:
    """Uniform time grid start, start + dt, ..., horizon."""

    horizon: float
    dt: float
    start: float = 0.0

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        span = self.horizon - self.start
        if span < 0:
            raise ValueError("horizon precedes start")
        k = span / self.dt
        if abs(k - round(k)) > 1e-12 * max(1.0, k):
            raise ValueError(f"dt={self.dt} does not divide the interval length {span}")

    @property
    def n_steps(self) -> int:
        return int(round((self.horizon - self.start) / self.dt))

    @property
    def times(self) -> np.ndarray:
        return self.start + self.dt * np.arange(self.n_steps + 1)

    def time(self, j: int) -> float:
        return self.start + j * self.dt

    def index_of(self, t: float) -> int:
        j = (t - self.start) / self.dt
        if abs(j - round(j)) > 1e-9 or not 0 <= round(j) <= self.n_steps:
            raise ValueError(f"time {t} is not on the grid")
        return int(round(j))

    def refined(self, factor: int = 2) -> "SimGrid":
        return SimGrid(self.horizon, self.dt / factor, self.start)


@dataclass(frozen=True)
class InitialCondition:
    """I.i.d. initial populations: ``count`` particles (fixed, or Poisson with
    that mean) at independent N(mean, std^2 I) positions."""

    count: float = 1
    mean: float | Sequence[float] = 0.0
    std: float = 1.0
    law: str = "fixed"

    def __post_init__(self):
        if self.law not in ("fixed", "poisson"):
            raise ValueError(f"unknown count law {self.law!r}")
        if self.law == "fixed" and (self.count < 0 or self.count != int(self.count)):
            raise ValueError("fixed count must be a nonnegative integer")
        if self.std < 0:
            raise ValueError("std must be nonnegative")

    def mean_vector(self, d: int) -> np.ndarray:
        return np.broadcast_to(np.asarray(self.mean, dtype=float), (d,)).copy()

    def counts(self, keys: np.ndarray) -> np.ndarray:
        if self.law == "fixed":
            return np.full(keys.shape, int(self.count), dtype=np.int64)
        u = rng.uniform(rng.derive(keys, rng.COUNT))
        return poisson.ppf(u, self.count).astype(np.int64)

    def positions(self, keys: np.ndarray, d: int) -> np.ndarray:
        z = rng.normal_vectors(rng.derive(keys, rng.INIT), d)
        return self.mean_vector(d) + self.std * z

    def environment_samples(self, n: int, d: int, key) -> tuple[np.ndarray, float]:
        """Positions drawn from the normalized initial intensity and its total mass."""
        pos = self.positions(rng.derive(key, np.arange(n)), d)
        return pos, float(self.count)


@dataclass
class Snapshot:
    """Flat state of all systems at one grid time."""

    x: np.ndarray
    system: np.ndarray
    population: np.ndarray
    node: np.ndarray
    N: int

    def select(self, r: int) -> np.ndarray:
        return np.flatnonzero(self.system == r)

    def measure(self, r: int) -> PointMeasure:
        idx = self.select(r)
        return PointMeasure(self.x[idx], np.full(idx.size, 1.0 / self.N), d=self.x.shape[1])


@dataclass
class _Events:
    time: np.ndarray
    system: np.ndarray
    population: np.ndarray
    node: np.ndarray
    litter: np.ndarray


@dataclass
class EnsembleResult:
    """Output of :func:`simulate_ensemble` for ``replicas`` independent systems."""

    grid: SimGrid
    N: int
    replicas: int
    seed: int
    dim: int
    counts: np.ndarray
    snapshots: dict = field(default_factory=dict)
    events: _Events | None = None
    node_parent: np.ndarray | None = None
    node_child: np.ndarray | None = None
    node_birth: np.ndarray | None = None

    @property
    def total_counts(self) -> np.ndarray:
        return self.counts

    def snapshot(self, j: int) -> Snapshot:
        try:
            return self.snapshots[j]
        except KeyError:
            raise KeyError(f"step {j} was not recorded") from None

    def measure(self, r: int, j: int) -> PointMeasure:
        return self.snapshot(j).measure(r)

    def environment_estimate(self, j: int) -> PointMeasure:
        """Ensemble average of the empirical measures at step j."""
        s = self.snapshot(j)
        return PointMeasure(s.x, np.full(len(s.x), 1.0 / (self.N * self.replicas)), d=self.dim)

    def label(self, node: int) -> Label:
        if self.node_parent is None:
            raise ValueError("genealogy was not tracked")
        path = []
        while node >= 0:
            path.append(int(self.node_child[node]))
            node = int(self.node_parent[node])
        return Label(tuple(reversed(path)))

    def populations(self, r: int, j: int) -> list[Population]:
        s = self.snapshot(j)
        idx = s.select(r)
        pops = [[] for _ in range(self.N)]
        for i in idx:
            node = int(s.node[i])
            pops[int(s.population[i])].append(Particle(self.label(node), tuple(s.x[i]), float(self.node_birth[node])))
        return [Population(p) for p in pops]

    def event_log(self, r: int) -> list[tuple[float, Label, int, int]]:
        """Events of system r as (time, parent label, litter, population index), time ordered."""
        if self.events is None:
            raise ValueError("events were not recorded")
        ev = self.events
        idx = np.flatnonzero(ev.system == r)
        rows = [(float(ev.time[i]), self.label(int(ev.node[i])), int(ev.litter[i]), int(ev.population[i])) for i in idx]
        rows.sort(key=lambda e: (e[0], e[3], e[1]))
        return rows

    def trajectory(self, r: int = 0) -> "BranchingTrajectory":
        steps = sorted(self.snapshots)
        pops = [self.populations(r, j) for j in steps]
        measures = [population_to_measure(p, 1.0 / self.N, d=self.dim) for p in pops]
        return BranchingTrajectory(self.grid, self.N, [self.grid.time(j) for j in steps], steps, measures, pops,
                                   self.event_log(r) if self.events is not None else None, self.counts[r])


@dataclass
class BranchingTrajectory:
    """One N-system: measures and populations at recorded grid steps plus its event log.

    ``event_log`` rows are ``(time, parent label, litter size, population index)``.
    """

    grid: SimGrid
    N: int
    times: list
    steps: list
    measures: list
    populations: list
    event_log: list | None
    counts: np.ndarray

    def measures_csv(self, header_comment: str | None = None) -> str:
        parts = []
        for k, (t, mu) in enumerate(zip(self.times, self.measures)):
            text = measure_to_csv(mu, header_comment if k == 0 else None, time=t)
            if k:
                text = text.split("\n", 1)[1]
            parts.append(text)
        if not parts:
            return ""
        return "".join(parts)

    def events_csv(self, header_comment: str | None = None) -> str:
        if self.event_log is None:
            raise ValueError("trajectory has no event log")
        lines = [f"# {header_comment}"] if header_comment else []
        lines.append("time,replica,parent_label,litter")
        for t, lab, l, i in self.event_log:
            lines.append(f"{t!r},{i},{lab},{l}")
        return "\n".join(lines) + "\n"


# ---------------------------------------------------------------- engine

@dataclass(frozen=True)
class _Setup:
    N: int
    coeffs: CoefficientSet
    init: InitialCondition
    grid: SimGrid
    seed: int
    record: tuple
    track: bool
    brownian: str
    fine_per_step: int
    cap: int


def _fine_path(setup: _Setup, lin: np.ndarray, j: int, d: int) -> np.ndarray:
    """Brownian path of each lineage at the fine points of grid cell j,
    relative to the cell start: shape (n, k + 1, d) with a leading zero."""
    k = setup.fine_per_step
    h = setup.grid.dt / k
    fine = j * k + np.arange(k, dtype=np.int64)
    z = rng.normal_vectors(rng.derive(lin[:, None], rng.BM, fine[None, :]), d)
    path = np.zeros((len(lin), k + 1, d))
    np.cumsum(np.sqrt(h) * z, axis=1, out=path[:, 1:])
    return path


def _bridge_point(path, rows, t0, h, s, tl, wl, keys, d):
    """Sample W(s) given the fine path and a known earlier point (tl, wl) in the
    same fine cell (pass tl = -inf when there is none)."""
    k = path.shape[1] - 1
    q = np.clip(np.floor((s - t0) / h).astype(np.int64), 0, k - 1)
    left_t = t0 + q * h
    right_t = left_t + h
    use_known = tl >= left_t
    lt = np.where(use_known, tl, left_t)
    lw = np.where(use_known[:, None], wl, path[rows, q])
    rw = path[rows, q + 1]
    span = right_t - lt
    u = np.where(span > 0, (s - lt) / np.where(span > 0, span, 1.0), 0.0)
    var = np.maximum(u * (right_t - s), 0.0)
    return lw + u[:, None] * (rw - lw) + np.sqrt(var)[:, None] * rng.normal_vectors(keys, d)


def _run_chunk(setup: _Setup, systems: np.ndarray):
    coeffs, grid, N = setup.coeffs, setup.grid, setup.N
    d = coeffs.dim
    gbar = float(coeffs.bounds.gamma_bar)
    S = len(systems)
    base = rng.seed_key(setup.seed)
    h = grid.dt / setup.fine_per_step

    # initial populations
    sys_keys = rng.derive(base, systems)
    pop_keys = rng.derive(sys_keys[:, None], np.arange(N)[None, :])
    k0 = setup.init.counts(pop_keys)
    sl = np.repeat(np.arange(S), k0.sum(axis=1))
    pop = np.tile(np.arange(N), S).repeat(k0.reshape(-1)) if S else np.zeros(0, np.int64)
    kk = np.concatenate([np.arange(c) for c in k0.reshape(-1)]) if k0.size else np.zeros(0, np.int64)
    pkey = pop_keys[sl, pop]
    x = setup.init.positions(rng.derive(pkey, kk), d).reshape(-1, d)
    lin = rng.derive(pkey, rng.ROOT, kk)
    cnt = np.zeros(len(sl), dtype=np.int64)
    tau = grid.start + rng.exponential(rng.derive(lin, rng.CAND, 0), gbar)

    track = setup.track
    node_parent, node_child, node_birth = [], [], []
    if track:
        node = np.arange(len(sl), dtype=np.int64)
        node_parent.append(np.full(len(sl), -1, dtype=np.int64))
        node_child.append(kk + 1)
        node_birth.append(np.full(len(sl), grid.start))
        n_nodes = len(sl)
    else:
        node = np.full(len(sl), -1, dtype=np.int64)
        n_nodes = 0
    ev_t, ev_s, ev_p, ev_n, ev_l = [], [], [], [], []

    n_steps = grid.n_steps
    counts = np.zeros((S, n_steps + 1), dtype=np.int64)
    snaps = {}

    def record(j):
        counts[:, j] = np.bincount(sl, minlength=S)
        if j in setup.record:
            snaps[j] = (x.copy(), systems[sl], pop.copy(), node.copy())

    record(0)
    J = coeffs.n_features
    ordered = J > 0
    for j in range(n_steps):
        t0, t1 = grid.time(j), grid.time(j + 1)
        if J:
            m_sys = np.stack([np.bincount(sl, weights=psi(x), minlength=S) for psi in coeffs.features], axis=1) / N
        else:
            m_sys = np.zeros((S, 0))
        m0 = m_sys[sl]
        # motion coefficients stay frozen at the left grid point for the whole cell
        b = coeffs.drift(t0, x, m0)
        sig = coeffs.diffusion(t0, x, m0)
        path = _fine_path(setup, lin, j, d)
        xr, wr = x.copy(), np.zeros_like(x)
        tr = np.full(len(sl), t0)
        alive = np.ones(len(sl), dtype=bool)

        while True:
            pending = np.flatnonzero(alive & (tau < t1))
            if not pending.size:
                break
            if ordered:
                # earliest pending candidate of every system, so the features seen
                # by the rate include all earlier events of the cell
                o = np.lexsort((tau[pending], sl[pending]))
                ps = pending[o]
                first = np.ones(ps.size, dtype=bool)
                first[1:] = sl[ps[1:]] != sl[ps[:-1]]
                active = ps[first]
            else:
                active = pending
            s = tau[active]
            ws = _bridge_point(path, active, t0, h, s, tr[active], wr[active],
                               rng.derive(lin[active], rng.BRIDGE, cnt[active]), d)
            xs = xr[active] + b[active] * (s - tr[active])[:, None] + np.einsum(
                "nij,nj->ni", sig[active], ws - wr[active])
            ma = m_sys[sl[active]]
            gam = coeffs.death_rate(s, xs, ma)
            mark = rng.uniform(rng.derive(lin[active], rng.MARK, cnt[active]))
            acc = mark * gbar < gam

            rej = active[~acc]
            xr[rej], wr[rej], tr[rej] = xs[~acc], ws[~acc], s[~acc]
            cnt[rej] += 1
            tau[rej] = s[~acc] + rng.exponential(rng.derive(lin[rej], rng.CAND, cnt[rej]), gbar)

            par = active[acc]
            if not par.size:
                continue
            sa, xa = s[acc], xs[acc]
            probs = coeffs.progeny(sa, xa, ma[acc])
            lit = progeny_from_uniform(rng.uniform(rng.derive(lin[par], rng.PROG, cnt[par])), probs)
            alive[par] = False
            tau[par] = np.inf
            if J:
                dm = np.stack([psi(xa) for psi in coeffs.features], axis=1) * ((lit - 1) / N)[:, None]
                np.add.at(m_sys, sl[par], dm)
            if track:
                ev_t.append(sa)
                ev_s.append(systems[sl[par]])
                ev_p.append(pop[par])
                ev_n.append(node[par])
                ev_l.append(lit)
            nc = int(lit.sum())
            if not nc:
                continue
            src = np.repeat(np.arange(par.size), lit)
            ci = np.arange(nc) - np.repeat(np.cumsum(lit) - lit, lit) + 1
            cp = par[src]
            cs = sa[src]
            cx = xa[src]
            clin = rng.derive(lin[cp], rng.CHILD, ci)
            cpath = _fine_path(setup, clin, j, d)
            cwr = _bridge_point(cpath, np.arange(nc), t0, h, cs, np.full(nc, -np.inf), np.zeros((nc, d)),
                                rng.derive(clin, rng.CHILD_BRIDGE), d)
            ctau = cs + rng.exponential(rng.derive(clin, rng.CAND, 0), gbar)
            cm = m0[cp]
            if track:
                cnode = n_nodes + np.arange(nc)
                n_nodes += nc
                node_parent.append(node[cp])
                node_child.append(ci)
                node_birth.append(cs)
            else:
                cnode = np.full(nc, -1, dtype=np.int64)
            x = np.concatenate([x, cx])
            xr = np.concatenate([xr, cx])
            wr = np.concatenate([wr, cwr])
            tr = np.concatenate([tr, cs])
            path = np.concatenate([path, cpath])
            b = np.concatenate([b, coeffs.drift(t0, cx, cm)])
            sig = np.concatenate([sig, coeffs.diffusion(t0, cx, cm)])
            m0 = np.concatenate([m0, cm])
            sl = np.concatenate([sl, sl[cp]])
            pop = np.concatenate([pop, pop[cp]])
            lin = np.concatenate([lin, clin])
            cnt = np.concatenate([cnt, np.zeros(nc, dtype=np.int64)])
            tau = np.concatenate([tau, ctau])
            node = np.concatenate([node, cnode])
            alive = np.concatenate([alive, np.ones(nc, dtype=bool)])

        x = xr + b * (t1 - tr)[:, None] + np.einsum("nij,nj->ni", sig, path[:, -1] - wr)
        keep = np.flatnonzero(alive)
        x, sl, pop, lin, cnt, tau, node = x[keep], sl[keep], pop[keep], lin[keep], cnt[keep], tau[keep], node[keep]
        if not np.all(np.isfinite(x)):
            bad = int(systems[sl[np.flatnonzero(~np.all(np.isfinite(x), axis=1))[0]]])
            raise NumericsError(f"non-finite position in system {bad} at t={t1:.6g}")
        sizes = np.bincount(sl, minlength=S)
        if sizes.size and sizes.max() > setup.cap:
            r = int(np.argmax(sizes))
            raise PopulationExplosion(t1, int(systems[r]), int(sizes[r]), setup.cap)
        record(j + 1)

    nodes = None
    events = None
    if track:
        nodes = (np.concatenate(node_parent), np.concatenate(node_child), np.concatenate(node_birth))
        cat = lambda a, dt_: np.concatenate(a) if a else np.zeros(0, dtype=dt_)
        events = (cat(ev_t, float), cat(ev_s, np.int64), cat(ev_p, np.int64), cat(ev_n, np.int64), cat(ev_l, np.int64))
    return counts, snaps, events, nodes


def _chunks(replicas: int, size: int):
    return [np.arange(a, min(a + size, replicas), dtype=np.int64) for a in range(0, replicas, size)]


def _run_chunk_packed(args):
    return _run_chunk(*args)


def simulate_ensemble(
    N: int,
    coeffs: CoefficientSet,
    init: InitialCondition,
    grid: SimGrid,
    seed: int,
    replicas: int = 1,
    record: str | Sequence[int] = "final",
    track_genealogy: bool = False,
    brownian: str = "increment",
    fine_steps: int | None = None,
    cap: int = 10 ** 6,
    workers: int = 1,
    chunk_particles: int = 1 << 16,
) -> EnsembleResult:
    """Simulate ``replicas`` independent N-systems on ``grid``.

    Parameters
    ----------
    record : "all", "final", "none" or a list of step indices
        Grid steps whose full particle state is stored.
    track_genealogy : bool
        Keep node tables and the event log so that labels can be rebuilt.
    brownian : {"increment", "fine"}
        "fine" defines every lineage's Brownian path on a base grid of
        ``fine_steps`` cells over the horizon, so runs with dt, dt/2, dt/4, ...
        (all dividing the base grid) see the same paths.
    workers : int
        Process count; results are identical for every value.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    if replicas < 1:
        raise ValueError("replicas must be >= 1")
    n = grid.n_steps
    if record == "all":
        rec = tuple(range(n + 1))
    elif record == "final":
        rec = (n,)
    elif record == "none":
        rec = ()
    else:
        rec = tuple(sorted(set(int(j) for j in record)))
    fine_per_step = 1
    if brownian == "fine":
        if fine_steps is None:
            fine_steps = n
        if fine_steps % n:
            raise ValueError(f"fine_steps={fine_steps} is not a multiple of the step count {n}")
        fine_per_step = fine_steps // n
    elif brownian != "increment":
        raise ValueError(f"unknown Brownian mode {brownian!r}")
    setup = _Setup(N, coeffs, init, grid, int(seed), rec, track_genealogy, brownian, fine_per_step, int(cap))
    per_system = max(1, int(N * max(init.count, 1)))
    size = max(1, chunk_particles // per_system)
    chunks = _chunks(replicas, size)
    if workers > 1 and len(chunks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            outs = list(ex.map(_run_chunk_packed, [(setup, c) for c in chunks]))
    else:
        outs = [_run_chunk(setup, c) for c in chunks]
    return _merge(setup, replicas, outs)


def _merge(setup: _Setup, replicas: int, outs) -> EnsembleResult:
    d = setup.coeffs.dim
    counts = np.concatenate([o[0] for o in outs], axis=0)
    snaps = {}
    for j in setup.record:
        parts = [o[1][j] for o in outs]
        snaps[j] = Snapshot(*(np.concatenate([p[k] for p in parts]) for k in range(4)), N=setup.N)
    res = EnsembleResult(setup.grid, setup.N, replicas, setup.seed, d, counts, snaps)
    if setup.track:
        offs = np.cumsum([0] + [len(o[3][0]) for o in outs])
        parent, child, birth = [], [], []
        ev = [[] for _ in range(5)]
        for k, o in enumerate(outs):
            p, c, bt = o[3]
            parent.append(np.where(p >= 0, p + offs[k], -1))
            child.append(c)
            birth.append(bt)
            for q in range(5):
                ev[q].append(o[2][q] + (offs[k] if q == 3 else 0))
        # node ids in snapshots are chunk-local; shift them
        for j in setup.record:
            shifted = []
            for k, o in enumerate(outs):
                shifted.append(o[1][j][3] + offs[k])
            snaps[j].node = np.concatenate(shifted)
        res.node_parent = np.concatenate(parent)
        res.node_child = np.concatenate(child)
        res.node_birth = np.concatenate(birth)
        res.events = _Events(*(np.concatenate(e) for e in ev))
        o = np.argsort(res.events.system, kind="stable")
        res.events = _Events(*(getattr(res.events, f)[o] for f in ("time", "system", "population", "node", "litter")))
    # canonical order: by system, keeping each system's internal order, which
    # does not depend on how systems were grouped into chunks
    for snap in snaps.values():
        o = np.argsort(snap.system, kind="stable")
        snap.x, snap.system, snap.population, snap.node = snap.x[o], snap.system[o], snap.population[o], snap.node[o]
    return res


def simulate_branching(
    N: int, coeffs: CoefficientSet, init: InitialCondition, grid: SimGrid, seed: int, **kwargs
) -> BranchingTrajectory:
    """One N-system with every grid step, all populations and the event log recorded."""
    kwargs.setdefault("record", "all")
    res = simulate_ensemble(N, coeffs, init, grid, seed, replicas=1, track_genealogy=True, **kwargs)
    return res.trajectory(0)


@dataclass(frozen=True)
class MassStatistics:
    """Per-grid-time mean, variance and standard error of the total particle count."""

    times: np.ndarray
    mean: np.ndarray
    var: np.ndarray
    stderr: np.ndarray
    n: int

    def growth_bound_holds(self, gamma_bar: float, M: float, slack: float = 3.0) -> bool:
        i, k = np.triu_indices(len(self.times), k=1)
        bound = self.mean[i] * np.exp(gamma_bar * M * (self.times[k] - self.times[i]))
        tol = slack * np.sqrt(self.stderr[i] ** 2 + self.stderr[k] ** 2)
        return bool(np.all(self.mean[k] <= bound + tol))


def mass_statistics(ensemble) -> MassStatistics:
    """Statistics of sum_i #K_t^i over an ensemble.

    Accepts an :class:`EnsembleResult` or a list of :class:`BranchingTrajectory`
    sharing one grid.
    """
    if isinstance(ensemble, EnsembleResult):
        counts = ensemble.counts.astype(float)
        times = ensemble.grid.times
    else:
        trajs = list(ensemble)
        if not trajs:
            raise ValueError("empty ensemble")
        grid = trajs[0].grid
        if any(t.grid != grid for t in trajs):
            raise ValueError("trajectories have mismatched grids")
        counts = np.stack([np.asarray(t.counts, dtype=float) for t in trajs])
        times = grid.times
    n = counts.shape[0]
    mean = counts.mean(axis=0)
    var = counts.var(axis=0, ddof=1) if n > 1 else np.zeros_like(mean)
    return MassStatistics(times, mean, var, np.sqrt(var / n), n)
