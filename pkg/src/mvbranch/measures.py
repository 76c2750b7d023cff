"""Labeled populations, finite point measures and the metric on populations."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np


class EvaluationError(ValueError):
    """A test function returned a non-finite value at some atom."""


class InvalidPerturbation(ValueError):
    """A negative atom update would leave a negative weight."""


@dataclass(frozen=True, order=True)
class Label:
    """Ulam-Harris-Neveu label; the empty path is the root."""

    path: tuple[int, ...] = ()

    def __post_init__(self):
        if any(int(k) < 1 for k in self.path):
            raise ValueError(f"label entries must be positive, got {self.path}")

    def child(self, i: int) -> "Label":
        return Label(self.path + (int(i),))

    def concat(self, other: "Label") -> "Label":
        return Label(self.path + other.path)

    def is_ancestor_of(self, other: "Label") -> bool:
        """Strict-prefix relation."""
        n = len(self.path)
        return n < len(other.path) and other.path[:n] == self.path

    def __str__(self) -> str:
        return ".".join(str(k) for k in self.path)

    @classmethod
    def parse(cls, text: str) -> "Label":
        text = text.strip()
        if not text:
            return cls(())
        return cls(tuple(int(k) for k in text.split(".")))


@dataclass(frozen=True)
class Particle:
    label: Label
    position: tuple[float, ...]
    birth_time: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "position", tuple(float(v) for v in self.position))


class Population:
    """A finite antichain of labeled particles (an element of the space E)."""

    def __init__(self, particles: Iterable[Particle] = ()):
        parts = sorted(particles, key=lambda p: p.label)
        labels = [p.label for p in parts]
        if len(set(labels)) != len(labels):
            raise ValueError("duplicate labels in population")
        # sorted order puts a prefix immediately before some descendant
        for a, b in zip(labels, labels[1:]):
            if a.is_ancestor_of(b):
                raise ValueError(f"labels {a} and {b} are not an antichain")
        dims = {len(p.position) for p in parts}
        if len(dims) > 1:
            raise ValueError("particles have mixed dimensions")
        self._particles = tuple(parts)
        self._index = {p.label: p for p in parts}

    @property
    def particles(self) -> tuple[Particle, ...]:
        return self._particles

    @property
    def labels(self) -> frozenset[Label]:
        return frozenset(self._index)

    def __len__(self) -> int:
        return len(self._particles)

    def __iter__(self):
        return iter(self._particles)

    def __getitem__(self, label: Label) -> Particle:
        return self._index[label]

    def positions(self, d: int | None = None) -> np.ndarray:
        if not self._particles:
            return np.zeros((0, d or 0))
        return np.array([p.position for p in self._particles], dtype=float)

    def __repr__(self) -> str:
        return f"Population({len(self)} particles)"


class PointMeasure:
    """Nonnegative finite measure on R^d stored as (location, weight) atoms.

    Atoms are kept unaggregated; coincident locations are allowed.  Arrays are
    read-only after construction.
    """

    __slots__ = ("_x", "_w")

    def __init__(self, locations, weights, d: int | None = None):
        w = np.array(weights, dtype=float).reshape(-1)
        x = np.array(locations, dtype=float)
        if x.size == 0:
            if d is None:
                d = x.shape[1] if x.ndim == 2 else 1
            x = np.zeros((0, d))
        elif x.ndim == 1:
            x = x.reshape(len(w), -1) if len(w) else x.reshape(0, -1)
        if x.shape[0] != w.shape[0]:
            raise ValueError(f"{x.shape[0]} locations but {w.shape[0]} weights")
        if d is not None and x.shape[1] != d:
            raise ValueError(f"expected dimension {d}, got {x.shape[1]}")
        if not np.all(np.isfinite(w)) or np.any(w < 0):
            raise ValueError("weights must be finite and nonnegative")
        if not np.all(np.isfinite(x)):
            raise ValueError("locations must be finite")
        x.setflags(write=False)
        w.setflags(write=False)
        self._x = x
        self._w = w

    @classmethod
    def empty(cls, d: int = 1) -> "PointMeasure":
        return cls(np.zeros((0, d)), np.zeros(0), d=d)

    @classmethod
    def dirac(cls, x, weight: float = 1.0) -> "PointMeasure":
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return cls(x[None, :], [weight])

    @property
    def locations(self) -> np.ndarray:
        return self._x

    @property
    def weights(self) -> np.ndarray:
        return self._w

    @property
    def dim(self) -> int:
        return self._x.shape[1]

    def __len__(self) -> int:
        return self._w.shape[0]

    def __repr__(self) -> str:
        return f"PointMeasure({len(self)} atoms, d={self.dim}, mass={mass(self):.6g})"

    def aggregated(self) -> "PointMeasure":
        """Merge atoms at identical locations and drop zero weights."""
        if len(self) == 0:
            return self
        pts, inv = np.unique(self._x, axis=0, return_inverse=True)
        w = np.bincount(inv.reshape(-1), weights=self._w, minlength=len(pts))
        keep = w > 0
        return PointMeasure(pts[keep], w[keep], d=self.dim)

    def scaled(self, factor: float) -> "PointMeasure":
        return PointMeasure(self._x, self._w * factor, d=self.dim)

    def to_csv(self, header_comment: str | None = None) -> str:
        return measure_to_csv(self, header_comment)


def _evaluate(f: Callable, x: np.ndarray) -> np.ndarray:
    vals = np.asarray(f(x), dtype=float).reshape(-1)
    if vals.shape[0] != x.shape[0]:
        raise EvaluationError(f"test function returned {vals.shape[0]} values for {x.shape[0]} atoms")
    bad = ~np.isfinite(vals)
    if bad.any():
        i = int(np.flatnonzero(bad)[0])
        raise EvaluationError(f"non-finite value at atom {i}, location {x[i].tolist()}")
    return vals


def pair(f: Callable[[np.ndarray], np.ndarray], mu: PointMeasure) -> float:
    """Integral of ``f`` against ``mu``; ``f`` maps an (n, d) array to n values."""
    if len(mu) == 0:
        return 0.0
    return float(np.dot(mu.weights, _evaluate(f, mu.locations)))


def mass(mu: PointMeasure) -> float:
    return float(mu.weights.sum())


def moment(mu: PointMeasure, p: float) -> float:
    """Sum of w_i |x_i|^p with the Euclidean norm."""
    if p < 1:
        raise ValueError(f"moment order must be >= 1, got {p}")
    if len(mu) == 0:
        return 0.0
    r = np.linalg.norm(mu.locations, axis=1)
    return float(np.dot(mu.weights, r ** p))


def population_to_measure(pops: Sequence[Population], scale: float, d: int | None = None) -> PointMeasure:
    """One atom of weight ``scale`` per particle across all populations."""
    if scale <= 0:
        raise ValueError("scale must be positive")
    xs = [p.position for pop in pops for p in pop]
    if not xs:
        return PointMeasure.empty(d or 1)
    return PointMeasure(np.array(xs), np.full(len(xs), float(scale)))


def population_distance(e1: Population, e2: Population) -> float:
    """Sum over shared labels of min(|x-y|, 1) plus the size of the symmetric difference."""
    k1, k2 = e1.labels, e2.labels
    shared = k1 & k2
    total = 0.0
    for k in sorted(shared):
        dx = np.subtract(e1[k].position, e2[k].position)
        total += min(float(np.linalg.norm(dx)), 1.0)
    return total + len(k1 ^ k2)


def add_atom(mu: PointMeasure, x, w: float) -> PointMeasure:
    """Return ``mu + w * delta_x``.

    A negative ``w`` removes mass from atoms located exactly at ``x``; the result
    stays a nonnegative measure.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if w >= 0:
        return PointMeasure(np.vstack([mu.locations, x[None, :]]), np.append(mu.weights, w), d=mu.dim)
    at_x = np.flatnonzero(np.all(mu.locations == x[None, :], axis=1))
    avail = mu.weights[at_x].sum() if at_x.size else 0.0
    need = -w
    if avail < need * (1 - 1e-12):
        raise InvalidPerturbation(f"cannot remove weight {need} at {x.tolist()}; only {avail} present")
    weights = mu.weights.copy()
    for i in at_x:
        take = min(weights[i], need)
        weights[i] -= take
        need -= take
        if need <= 0:
            break
    keep = weights > 0
    return PointMeasure(mu.locations[keep], weights[keep], d=mu.dim)


def _fmt(v: float) -> str:
    return repr(float(v))


def measure_to_csv(mu: PointMeasure, header_comment: str | None = None, time: float | None = None) -> str:
    buf = io.StringIO()
    if header_comment:
        buf.write(f"# {header_comment}\n")
    cols = [f"x{i + 1}" for i in range(mu.dim)] + ["weight"]
    if time is not None:
        cols = ["time"] + cols
    buf.write(",".join(cols) + "\n")
    for loc, w in zip(mu.locations, mu.weights):
        row = [_fmt(v) for v in loc] + [_fmt(w)]
        if time is not None:
            row = [_fmt(time)] + row
        buf.write(",".join(row) + "\n")
    return buf.getvalue()


def _data_lines(text: str) -> list[str]:
    return [ln for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]


def measure_from_csv(text: str) -> PointMeasure:
    """Parse the ``x1,...,xd,weight`` format (``#`` lines are ignored)."""
    rows = list(csv.reader(_data_lines(text)))
    if not rows:
        raise ValueError("empty measure file: header row is mandatory")
    header = [h.strip() for h in rows[0]]
    if not header or header[-1] != "weight" or any(h != f"x{i + 1}" for i, h in enumerate(header[:-1])):
        raise ValueError(f"bad measure header {header!r}; expected x1,...,xd,weight")
    d = len(header) - 1
    data = np.array([[float(v) for v in r] for r in rows[1:]], dtype=float).reshape(-1, d + 1)
    return PointMeasure(data[:, :d], data[:, d], d=d)


def read_measure(path) -> PointMeasure:
    with open(path, encoding="utf-8") as fh:
        return measure_from_csv(fh.read())


def write_measure(path, mu: PointMeasure, header_comment: str | None = None) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(measure_to_csv(mu, header_comment))
