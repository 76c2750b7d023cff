"""Lifted weighted-particle system and the deterministic reference flow.

The branching environment measure is represented without branching: each of
Mp particles carries a position y and a weight z.  Positions follow the
McKean-Vlasov SDE driven by the projected measure

    mu_t = (1/Mp) sum_p z_p delta_{y_p},

and weights grow along paths by z <- z * exp(c dt) with the net growth rate
c = gamma (sum_l l p_l - 1).  The projection of the ensemble approximates the
mean-field limit of the interacting branching system.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import rng
from .branching import InitialCondition, NumericsError, SimGrid
from .coefficients import CoefficientSet
from .measures import PointMeasure, measure_to_csv
from .metrics import bounded_lipschitz

__all__ = [
    "WeightedEnsemble",
    "LiftedLaw",
    "ReferenceFlow",
    "project_T_star",
    "lift_Phi",
    "simulate_lifted_self",
    "picard_solve",
]


@dataclass
class WeightedEnsemble:
    """Positions y of shape (Mp, d) with nonnegative weights z at a given time."""

    y: np.ndarray
    z: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        self.y = np.atleast_2d(np.asarray(self.y, dtype=float))
        self.z = np.asarray(self.z, dtype=float).reshape(-1)
        if self.y.shape[0] != self.z.shape[0]:
            raise ValueError("y and z lengths differ")
        if np.any(self.z < 0):
            raise ValueError("weights must be nonnegative")

    def __len__(self) -> int:
        return len(self.z)


def project_T_star(ens: WeightedEnsemble, scale: float | None = None) -> PointMeasure:
    """Atom of weight ``scale * z`` at each y (default scale 1/Mp)."""
    if scale is None:
        scale = 1.0 / max(len(ens), 1)
    if scale <= 0:
        raise ValueError("scale must be positive")
    return PointMeasure(ens.y, scale * ens.z, d=ens.y.shape[1])


@dataclass(frozen=True)
class LiftedLaw:
    """The product law (normalized mu) x delta_{mass(mu)} on R^d x [0, inf)."""

    locations: np.ndarray
    probs: np.ndarray
    total_mass: float
    dim: int

    def sample(self, n: int, key) -> WeightedEnsemble:
        if self.total_mass == 0 or len(self.probs) == 0:
            return WeightedEnsemble(np.zeros((n, self.dim)), np.zeros(n))
        u = rng.uniform(rng.derive(key, rng.PICK, np.arange(n)))
        cum = np.cumsum(self.probs)
        cum[-1] = 1.0
        idx = np.searchsorted(cum, u, side="right")
        return WeightedEnsemble(self.locations[idx], np.full(n, self.total_mass))


def lift_Phi(mu: PointMeasure) -> LiftedLaw:
    """Lift a finite measure to a probability law on positions and weights.

    The zero measure lifts to the point (0, 0).
    """
    m = float(mu.weights.sum())
    if m == 0:
        return LiftedLaw(np.zeros((1, mu.dim)), np.ones(1), 0.0, mu.dim)
    return LiftedLaw(np.array(mu.locations), mu.weights / m, m, mu.dim)


@dataclass
class ReferenceFlow:
    """Projected measures of a lifted ensemble at recorded grid steps."""

    grid: SimGrid
    steps: list
    measures: list
    features: np.ndarray
    method: str
    Mp: int
    seed: int
    gaps: list = field(default_factory=list)
    final: WeightedEnsemble | None = None

    def measure_at(self, t: float) -> PointMeasure:
        j = self.grid.index_of(t)
        try:
            return self.measures[self.steps.index(j)]
        except ValueError:
            raise KeyError(f"step {j} was not recorded") from None

    @property
    def terminal(self) -> PointMeasure:
        return self.measures[-1]

    def manifest(self) -> dict:
        return {
            "method": self.method,
            "Mp": self.Mp,
            "dt": self.grid.dt,
            "horizon": self.grid.horizon,
            "start": self.grid.start,
            "seed": self.seed,
            "iteration_gaps": [float(g) for g in self.gaps],
        }

    def manifest_json(self) -> str:
        return json.dumps(self.manifest(), sort_keys=True, indent=2) + "\n"

    def measures_csv(self, header_comment: str | None = None) -> str:
        out = []
        for k, (j, mu) in enumerate(zip(self.steps, self.measures)):
            text = measure_to_csv(mu, header_comment if k == 0 else None, time=self.grid.time(j))
            if k:
                text = text.split("\n", 1)[1]
            out.append(text)
        return "".join(out)


def _initial_ensemble(Mp: int, init, d: int, key) -> WeightedEnsemble:
    if isinstance(init, WeightedEnsemble):
        if len(init) != Mp:
            raise ValueError(f"ensemble has {len(init)} particles, expected {Mp}")
        return WeightedEnsemble(init.y.copy(), init.z.copy(), init.time)
    if isinstance(init, LiftedLaw):
        return init.sample(Mp, rng.derive(key, rng.INIT))
    if isinstance(init, InitialCondition):
        y = init.positions(rng.derive(key, rng.INIT, np.arange(Mp)), d).reshape(Mp, d)
        return WeightedEnsemble(y, np.full(Mp, float(init.count)))
    raise TypeError(f"unsupported initial condition {type(init).__name__}")


def _features(coeffs: CoefficientSet, y, z, Mp) -> np.ndarray:
    return coeffs.feature_matrix(y, z / Mp) if coeffs.n_features else np.zeros(0)


def _evolve(Mp, coeffs, ens, grid, key, record, flow_features=None):
    """Run the ensemble over ``grid``; coefficients see the self-consistent
    features, or ``flow_features[j]`` when a frozen flow is supplied."""
    d = coeffs.dim
    y, z = ens.y.copy(), ens.z.copy()
    lin = rng.derive(key, rng.LIFT, np.arange(Mp))
    n = grid.n_steps
    feats = np.zeros((n + 1, coeffs.n_features))
    measures, steps = [], []

    def rec(j):
        if j in record:
            steps.append(j)
            measures.append(project_T_star(WeightedEnsemble(y.copy(), z)))

    feats[0] = _features(coeffs, y, z, Mp)
    rec(0)
    sq = np.sqrt(grid.dt)
    for j in range(n):
        t = grid.time(j)
        f = feats[j] if flow_features is None else flow_features[j]
        m = np.broadcast_to(f, (Mp, coeffs.n_features))
        b = coeffs.drift(t, y, m)
        sig = coeffs.diffusion(t, y, m)
        c = coeffs.growth(t, y, m)
        dW = sq * rng.normal_vectors(rng.derive(lin, rng.BM, j), d)
        y = y + b * grid.dt + np.einsum("nij,nj->ni", sig, dW)
        z = z * np.exp(c * grid.dt)
        if not (np.all(np.isfinite(y)) and np.all(np.isfinite(z))):
            raise NumericsError(f"non-finite lifted state at t={grid.time(j + 1):.6g}")
        feats[j + 1] = _features(coeffs, y, z, Mp)
        rec(j + 1)
    return steps, measures, feats, WeightedEnsemble(y, z, grid.horizon)


def _record_set(grid: SimGrid, record) -> set:
    n = grid.n_steps
    if record == "all":
        return set(range(n + 1))
    if record == "final":
        return {0, n}
    return set(int(j) for j in record) | {0, n}


def simulate_lifted_self(
    Mp: int, coeffs: CoefficientSet, init, grid: SimGrid, seed: int, record="all"
) -> ReferenceFlow:
    """Self-interacting weighted ensemble; the flow is the projection at each step.

    ``init`` is an :class:`InitialCondition` (positions from its law, weight
    equal to the mean initial count), a :class:`LiftedLaw`, or a
    :class:`WeightedEnsemble` of size Mp.
    """
    if Mp < 2:
        raise ValueError("Mp must be >= 2")
    key = rng.seed_key(seed)
    ens = _initial_ensemble(Mp, init, coeffs.dim, key)
    steps, measures, feats, final = _evolve(Mp, coeffs, ens, grid, key, _record_set(grid, record))
    return ReferenceFlow(grid, steps, measures, feats, "self-interaction", Mp, int(seed), [], final)


def picard_solve(
    Mp: int,
    coeffs: CoefficientSet,
    init,
    grid: SimGrid,
    iterations: int,
    seed: int,
    record="all",
    gap_points: int = 5,
) -> ReferenceFlow:
    """Fixed-point iteration on the measure flow.

    Iteration 0 is the initial projection held constant in time; iteration k+1
    evolves the ensemble (same Brownian draws every time) with coefficients
    evaluated against iteration k's flow.  ``gaps[k]`` is the largest
    bounded-Lipschitz distance between iterations k and k+1 over
    ``gap_points`` evenly spaced grid times.
    """
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    key = rng.seed_key(seed)
    ens = _initial_ensemble(Mp, init, coeffs.dim, key)
    n = grid.n_steps
    probe = sorted(set(np.linspace(0, n, gap_points).round().astype(int).tolist()))
    rec = _record_set(grid, record) | set(probe)
    mu0 = project_T_star(ens)
    prev_feats = np.broadcast_to(_features(coeffs, ens.y, ens.z, Mp), (n + 1, coeffs.n_features))
    prev = {j: mu0 for j in probe}
    gaps = []
    for _ in range(iterations):
        steps, measures, feats, final = _evolve(Mp, coeffs, ens, grid, key, rec, prev_feats)
        cur = {j: measures[steps.index(j)] for j in probe}
        gaps.append(max(bounded_lipschitz(cur[j], prev[j]) for j in probe))
        prev, prev_feats = cur, feats
    keep = [k for k, j in enumerate(steps) if j in _record_set(grid, record)]
    return ReferenceFlow(grid, [steps[k] for k in keep], [measures[k] for k in keep], feats,
                         f"picard({iterations})", Mp, int(seed), gaps, final)
