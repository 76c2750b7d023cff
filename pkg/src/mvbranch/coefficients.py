"""Coefficient sets (drift, diffusion, death rate, progeny law) and scenarios.

Coefficients are vectorized: every callable receives ``t`` (float), ``x`` of
shape (n, d) and ``m`` of shape (n, J), the values of the scenario's feature
pairings <psi_j, mu> seen by each particle.  Measure dependence therefore
enters only through finitely many pairings, which keeps the Lipschitz
constant in the bounded-Lipschitz distance checkable.
"""

from __future__ import annotations

from dataclasses import dataclass, field, asdict
from typing import Callable, Sequence

import numpy as np

from .measures import PointMeasure, pair
from . import rng

__all__ = [
    "Bounds",
    "CoefficientSet",
    "OffspringPartition",
    "ProbePlan",
    "ValidationReport",
    "Scenario",
    "SCENARIO_FAMILIES",
    "net_growth_c",
    "sample_progeny",
    "progeny_from_uniform",
    "validate_assumptions",
]


@dataclass(frozen=True)
class Bounds:
    """Declared constants: sup-norm bound M, Lipschitz constant L, rate cap
    gamma_bar, ellipticity floor eps0 and maximal litter size L_max."""

    M: float
    L: float
    gamma_bar: float
    eps0: float
    L_max: int


class CoefficientSet:
    """Immutable tuple (b, sigma, gamma, p) with declared bounds."""

    def __init__(
        self,
        dim: int,
        drift: Callable,
        diffusion: Callable,
        death_rate: Callable,
        progeny: Callable,
        bounds: Bounds,
        features: Sequence[Callable] = (),
        name: str = "custom",
    ):
        self.dim = int(dim)
        self.drift = drift
        self.diffusion = diffusion
        self.death_rate = death_rate
        self.progeny = progeny
        self.bounds = bounds
        self.features = tuple(features)
        self.name = name

    @property
    def n_features(self) -> int:
        return len(self.features)

    @property
    def measure_independent(self) -> bool:
        return not self.features

    def feature_values(self, mu: PointMeasure) -> np.ndarray:
        return np.array([pair(psi, mu) for psi in self.features], dtype=float)

    def feature_matrix(self, x: np.ndarray, weights: np.ndarray) -> np.ndarray:
        """Pairings of every feature with the atomic measure sum_i w_i delta_{x_i}."""
        return np.array([np.dot(weights, psi(x)) for psi in self.features], dtype=float)

    def _broadcast(self, x, mu):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        m = np.broadcast_to(self.feature_values(mu), (x.shape[0], self.n_features))
        return x, m

    # pointwise helpers on (t, x, mu)
    def b(self, t, x, mu):
        x, m = self._broadcast(x, mu)
        return self.drift(t, x, m)[0]

    def sigma(self, t, x, mu):
        x, m = self._broadcast(x, mu)
        return self.diffusion(t, x, m)[0]

    def gamma(self, t, x, mu):
        x, m = self._broadcast(x, mu)
        return float(self.death_rate(t, x, m)[0])

    def p(self, t, x, mu):
        x, m = self._broadcast(x, mu)
        return self.progeny(t, x, m)[0]

    def growth(self, t, x, m):
        """Vectorized net growth c = gamma * (sum_l l p_l - 1)."""
        probs = self.progeny(t, x, m)
        mean_litter = probs @ np.arange(probs.shape[1])
        return self.death_rate(t, x, m) * (mean_litter - 1.0)

    def __repr__(self) -> str:
        return f"CoefficientSet({self.name!r}, d={self.dim}, features={self.n_features})"


def net_growth_c(coeffs: CoefficientSet, t: float, x, mu: PointMeasure) -> float:
    x, m = coeffs._broadcast(x, mu)
    return float(coeffs.growth(t, x, m)[0])


class OffspringPartition:
    """Partition of [0, 1) into intervals I_l = [cum[l], cum[l+1])."""

    def __init__(self, probs: Sequence[float]):
        p = np.asarray(probs, dtype=float)
        if p.ndim != 1 or p.size == 0 or np.any(p < 0):
            raise ValueError("progeny probabilities must be a nonnegative vector")
        if abs(p.sum() - 1.0) > 1e-12:
            raise ValueError(f"progeny probabilities sum to {p.sum()!r}, not 1")
        cum = np.concatenate([[0.0], np.cumsum(p)])
        cum[-1] = 1.0
        self.cumulative = np.maximum.accumulate(cum)
        self.cumulative.setflags(write=False)

    @property
    def L_max(self) -> int:
        return len(self.cumulative) - 2

    def interval(self, l: int) -> tuple[float, float]:
        return float(self.cumulative[l]), float(self.cumulative[l + 1])

    def probabilities(self) -> np.ndarray:
        return np.diff(self.cumulative)


def sample_progeny(u: float, part: OffspringPartition) -> int:
    """The unique litter size l with u in I_l."""
    if not 0.0 <= u < 1.0:
        raise ValueError(f"u must lie in [0, 1), got {u}")
    return int(np.searchsorted(part.cumulative, u, side="right") - 1)


def progeny_from_uniform(u: np.ndarray, probs: np.ndarray) -> np.ndarray:
    """Vectorized litter sizes: u of shape (n,), probs of shape (n, L_max + 1)."""
    cum = np.cumsum(probs, axis=1)
    cum[:, -1] = 1.0
    return (u[:, None] >= cum[:, :-1]).sum(axis=1)


# ---------------------------------------------------------------- validation

@dataclass(frozen=True)
class ProbePlan:
    """Random probing of coefficients over a box of points and small measures."""

    n_points: int = 200
    radius: float = 3.0
    n_atoms: int = 4
    max_weight: float = 1.0
    jitter: float = 0.05
    horizon: float = 1.0
    seed: int = 0


@dataclass
class ValidationReport:
    sup_b: float
    sup_sigma: float
    sup_mean_litter: float
    gamma_range: tuple[float, float]
    max_prob_defect: float
    min_eigenvalue: float
    lip_b: float
    lip_sigma: float
    lip_c: float
    sup_c: float
    violations: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.violations

    def as_dict(self) -> dict:
        out = asdict(self)
        out["passed"] = self.passed
        return out


def validate_assumptions(coeffs: CoefficientSet, probe: ProbePlan = ProbePlan()) -> ValidationReport:
    """Empirical sup-norms, Lipschitz quotients and ellipticity at random probes.

    Lipschitz quotients are |Delta| / (|x - y| + d(mu, nu)) with d the exact
    bounded-Lipschitz distance.
    """
    from .metrics import bounded_lipschitz

    d, n = coeffs.dim, probe.n_points
    key = rng.seed_key(probe.seed)
    idx = np.arange(n)

    def box(tag, shape):
        u = rng.uniform(rng.derive(key, tag, np.arange(int(np.prod(shape)))))
        return (2 * u - 1).reshape(shape) * probe.radius

    t = rng.uniform(rng.derive(key, 1, idx)) * probe.horizon
    x = box(2, (n, d))
    y = x + probe.jitter * rng.normal_vectors(rng.derive(key, 3, idx), d)
    atoms = box(4, (n, probe.n_atoms, d))
    w = rng.uniform(rng.derive(key, 5, np.arange(n * probe.n_atoms))).reshape(n, probe.n_atoms) * probe.max_weight
    atoms2 = atoms + probe.jitter * rng.normal_vectors(rng.derive(key, 6, np.arange(n * probe.n_atoms)), d).reshape(
        n, probe.n_atoms, d
    )
    w2 = np.clip(
        w + probe.jitter * (rng.uniform(rng.derive(key, 7, np.arange(w.size))).reshape(w.shape) - 0.5), 0.0, None
    )

    mus = [PointMeasure(atoms[i], w[i], d=d) for i in range(n)]
    nus = [PointMeasure(atoms2[i], w2[i], d=d) for i in range(n)]
    m1 = np.array([coeffs.feature_values(mu) for mu in mus]).reshape(n, coeffs.n_features)
    m2 = np.array([coeffs.feature_values(nu) for nu in nus]).reshape(n, coeffs.n_features)

    out = {}
    for tag, (xx, mm) in (("a", (x, m1)), ("b", (y, m2))):
        rows = [(t[i], xx[i:i + 1], mm[i:i + 1]) for i in range(n)]
        b = np.stack([coeffs.drift(*r)[0] for r in rows])
        s = np.stack([coeffs.diffusion(*r)[0] for r in rows])
        g = np.array([coeffs.death_rate(*r)[0] for r in rows])
        p = np.stack([coeffs.progeny(*r)[0] for r in rows])
        c = g * (p @ np.arange(p.shape[1]) - 1.0)
        out[tag] = (b, s, g, p, c)

    b, s, g, p, c = out["a"]
    b2, s2, g2, p2, c2 = out["b"]
    dist = np.array([bounded_lipschitz(mu, nu) for mu, nu in zip(mus, nus)])
    denom = np.linalg.norm(x - y, axis=1) + dist
    ok = denom > 0

    def quotient(delta):
        return float(np.max(delta[ok] / denom[ok])) if ok.any() else 0.0

    allb, alls = np.vstack([b, b2]), np.vstack([s, s2])
    allg, allp, allc = np.concatenate([g, g2]), np.vstack([p, p2]), np.concatenate([c, c2])
    eig = np.linalg.eigvalsh(np.einsum("nij,nkj->nik", alls, alls))
    rep = ValidationReport(
        sup_b=float(np.max(np.linalg.norm(allb, axis=1))),
        sup_sigma=float(np.max(np.linalg.norm(alls, ord=2, axis=(1, 2)))),
        sup_mean_litter=float(np.max(allp @ np.arange(allp.shape[1]))),
        gamma_range=(float(allg.min()), float(allg.max())),
        max_prob_defect=float(np.max(np.abs(allp.sum(axis=1) - 1.0))),
        min_eigenvalue=float(eig.min()),
        lip_b=quotient(np.linalg.norm(b - b2, axis=1)),
        lip_sigma=quotient(np.linalg.norm(s - s2, axis=(1, 2))),
        lip_c=quotient(np.abs(c - c2)),
        sup_c=float(np.max(np.abs(allc))),
    )
    bd, tol = coeffs.bounds, 1e-12
    checks = [
        (rep.sup_b <= bd.M * (1 + tol), f"sup|b| = {rep.sup_b:.6g} exceeds M = {bd.M}"),
        (rep.sup_sigma <= bd.M * (1 + tol), f"sup|sigma| = {rep.sup_sigma:.6g} exceeds M = {bd.M}"),
        (rep.sup_mean_litter <= bd.M * (1 + tol), f"sup sum l p_l = {rep.sup_mean_litter:.6g} exceeds M = {bd.M}"),
        (rep.gamma_range[0] >= 0, f"negative death rate {rep.gamma_range[0]:.6g}"),
        (rep.gamma_range[1] <= bd.gamma_bar * (1 + tol), f"death rate {rep.gamma_range[1]:.6g} exceeds gamma_bar = {bd.gamma_bar}"),
        (rep.max_prob_defect <= 1e-12, f"progeny probabilities off by {rep.max_prob_defect:.3g}"),
        (allp.shape[1] <= bd.L_max + 1, f"progeny support {allp.shape[1] - 1} exceeds L_max = {bd.L_max}"),
        (rep.min_eigenvalue >= bd.eps0 * (1 - 1e-9), f"min eigenvalue of sigma sigma^T = {rep.min_eigenvalue:.6g} below eps0 = {bd.eps0}"),
        (rep.lip_b <= bd.L * (1 + 1e-9), f"Lipschitz quotient of b = {rep.lip_b:.6g} exceeds L = {bd.L}"),
        (rep.lip_sigma <= bd.L * (1 + 1e-9), f"Lipschitz quotient of sigma = {rep.lip_sigma:.6g} exceeds L = {bd.L}"),
        (rep.lip_c <= bd.L * (1 + 1e-9), f"Lipschitz quotient of c = {rep.lip_c:.6g} exceeds L = {bd.L}"),
    ]
    rep.violations = [msg for ok_, msg in checks if not ok_]
    return rep


# ---------------------------------------------------------------- scenarios
# Families are plain classes so that coefficient sets pickle for worker pools.

def _one(x):
    return np.ones(x.shape[0])


def _tanh_x1(x):
    return np.tanh(x[:, 0])


class _Constant:
    def __init__(self, d, drift, sigma, gamma, probs):
        self.b0 = np.broadcast_to(np.asarray(drift, dtype=float), (d,)).copy()
        self.s0 = float(sigma) * np.eye(d)
        self.g0 = float(gamma)
        self.p0 = np.asarray(probs, dtype=float)

    def drift(self, t, x, m):
        return np.broadcast_to(self.b0, x.shape).copy()

    def diffusion(self, t, x, m):
        return np.broadcast_to(self.s0, (x.shape[0],) + self.s0.shape).copy()

    def death_rate(self, t, x, m):
        return np.full(x.shape[0], self.g0)

    def progeny(self, t, x, m):
        return np.broadcast_to(self.p0, (x.shape[0], self.p0.size)).copy()


class _MeanField(_Constant):
    """b = -x + a tanh(<tanh x_1, mu>), gamma = gamma0 sigmoid(kappa (<1, mu> - m_ref))."""

    def __init__(self, d, coupling, sigma, gamma0, kappa, mass_ref, p2):
        super().__init__(d, 0.0, sigma, gamma0, [1.0 - p2, 0.0, p2])
        self.a = float(coupling)
        self.kappa = float(kappa)
        self.mass_ref = float(mass_ref)

    def drift(self, t, x, m):
        return -x + self.a * np.tanh(m[:, 0])[:, None]

    def death_rate(self, t, x, m):
        return self.g0 / (1.0 + np.exp(-self.kappa * (m[:, 1] - self.mass_ref)))


def _progeny_mean(probs):
    return float(np.dot(np.arange(len(probs)), probs))


def _build_constant(d, params, bounds):
    fam = _Constant(d, params.get("drift", 0.0), params.get("sigma", 1.0), params.get("gamma", 0.0),
                    params.get("progeny", [0.0, 1.0]))
    return fam, ()


def _build_pure_death(d, params, bounds):
    fam = _Constant(d, params.get("drift", 0.0), params.get("sigma", 1.0), params.get("gamma", 0.5), [1.0])
    return fam, ()


def _build_binary(d, params, bounds):
    p2 = params.get("p2", 1.0)
    fam = _Constant(d, params.get("drift", 0.0), params.get("sigma", 1.0), params.get("gamma", 1.0),
                    [1.0 - p2, 0.0, p2])
    return fam, ()


def _build_mean_field(d, params, bounds):
    fam = _MeanField(
        d,
        params.get("coupling", 0.5),
        params.get("sigma", 1.0),
        params.get("gamma0", 1.0),
        params.get("kappa", -1.0),
        params.get("mass_ref", 1.0),
        params.get("p2", 0.6),
    )
    return fam, (_tanh_x1, _one)


def _default_bounds(family, d, params):
    sigma = abs(params.get("sigma", 1.0))
    if family == "mean-field":
        g = params.get("gamma0", 1.0)
        p2 = params.get("p2", 0.6)
        a = abs(params.get("coupling", 0.5))
        # drift is unbounded; M covers the probing box of radius 3
        M = max(3.0 * np.sqrt(d) + a * np.sqrt(d), sigma, 2 * p2)
        L = max(1.0 + a * np.sqrt(d), g * abs(params.get("kappa", -1.0)) / 4 * abs(2 * p2 - 1))
        return Bounds(M=float(M), L=float(L), gamma_bar=float(g), eps0=sigma ** 2, L_max=2)
    if family == "constant":
        probs = params.get("progeny", [0.0, 1.0])
        b0 = np.broadcast_to(np.asarray(params.get("drift", 0.0), dtype=float), (d,))
        M = max(float(np.linalg.norm(b0)), sigma, _progeny_mean(probs), 1e-12)
        return Bounds(M=M, L=1.0, gamma_bar=float(params.get("gamma", 0.0)), eps0=sigma ** 2, L_max=len(probs) - 1)
    if family == "pure-death":
        b0 = np.broadcast_to(np.asarray(params.get("drift", 0.0), dtype=float), (d,))
        M = max(float(np.linalg.norm(b0)), sigma, 1e-12)
        return Bounds(M=M, L=1.0, gamma_bar=float(params.get("gamma", 0.5)), eps0=sigma ** 2, L_max=0)
    if family == "binary-branching":
        b0 = np.broadcast_to(np.asarray(params.get("drift", 0.0), dtype=float), (d,))
        M = max(float(np.linalg.norm(b0)), sigma, 2 * params.get("p2", 1.0), 1e-12)
        return Bounds(M=M, L=1.0, gamma_bar=float(params.get("gamma", 1.0)), eps0=sigma ** 2, L_max=2)
    raise KeyError(family)


SCENARIO_FAMILIES = {
    "constant": (_build_constant, {"drift", "sigma", "gamma", "progeny"}),
    "pure-death": (_build_pure_death, {"drift", "sigma", "gamma"}),
    "binary-branching": (_build_binary, {"drift", "sigma", "gamma", "p2"}),
    "mean-field": (_build_mean_field, {"coupling", "sigma", "gamma0", "kappa", "mass_ref", "p2"}),
}


@dataclass(frozen=True)
class Scenario:
    """A built-in coefficient family with parameters, dimension and bounds.

    The families are constructions of this package (the theory does not fix
    any concrete coefficients); each admits a closed-form or brute-force
    oracle for at least one observable.
    """

    family: str
    params: dict = field(default_factory=dict)
    dim: int = 1
    bounds: Bounds | None = None

    def __post_init__(self):
        if self.family not in SCENARIO_FAMILIES:
            raise ValueError(f"unknown scenario family {self.family!r}; known: {sorted(SCENARIO_FAMILIES)}")
        allowed = SCENARIO_FAMILIES[self.family][1]
        unknown = set(self.params) - allowed
        if unknown:
            raise ValueError(f"unknown parameters for {self.family!r}: {sorted(unknown)}")
        if self.bounds is None:
            object.__setattr__(self, "bounds", _default_bounds(self.family, self.dim, self.params))

    def build(self) -> CoefficientSet:
        builder = SCENARIO_FAMILIES[self.family][0]
        fam, feats = builder(self.dim, self.params, self.bounds)
        return CoefficientSet(
            self.dim, fam.drift, fam.diffusion, fam.death_rate, fam.progeny, self.bounds, feats, name=self.family
        )

    def to_dict(self) -> dict:
        return {"family": self.family, "params": dict(self.params), "dim": self.dim, "bounds": asdict(self.bounds)}

    @classmethod
    def from_dict(cls, data: dict) -> "Scenario":
        unknown = set(data) - {"family", "params", "dim", "bounds"}
        if unknown:
            raise ValueError(f"unknown scenario keys: {sorted(unknown)}")
        bounds = data.get("bounds")
        if bounds is not None:
            extra = set(bounds) - {"M", "L", "gamma_bar", "eps0", "L_max"}
            if extra:
                raise ValueError(f"unknown bounds keys: {sorted(extra)}")
            bounds = Bounds(**bounds)
        return cls(data["family"], dict(data.get("params", {})), int(data.get("dim", 1)), bounds)
