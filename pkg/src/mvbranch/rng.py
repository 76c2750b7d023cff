"""Counter-based random numbers.

Every draw is a pure function of an integer key, so a particle's noise is fixed
by *who* it is (system, population, lineage) and *when* it is drawn (step,
candidate counter), never by the order in which particles are processed.  This
makes ensembles reproducible independently of batching and worker count.

The mixing function is the SplitMix64 finalizer applied to structured keys.
"""

import numpy as np
from scipy.special import ndtri

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S30, _S27, _S31, _S11 = (np.uint64(s) for s in (30, 27, 31, 11))
_TWO53 = 2.0 ** -53

# stream tags
INIT = 1
BM = 2
CAND = 3
MARK = 4
PROG = 5
BRIDGE = 6
CHILD = 7
LIFT = 8
COUNT = 9
ROOT = 10
PICK = 11
CHILD_BRIDGE = 12


def mix64(x):
    """SplitMix64 finalizer on a uint64 array (wrapping arithmetic)."""
    with np.errstate(over="ignore"):
        z = np.asarray(x, dtype=np.uint64) + _GOLDEN
        z = (z ^ (z >> _S30)) * _M1
        z = (z ^ (z >> _S27)) * _M2
        return z ^ (z >> _S31)


def derive(base, *parts):
    """Fold integer parts into a key; broadcasts over array arguments."""
    h = np.asarray(base, dtype=np.uint64)
    for p in parts:
        p = np.asarray(p)
        if p.dtype != np.uint64:
            p = p.astype(np.int64).astype(np.uint64)
        h = mix64(h ^ mix64(p))
    return h


def seed_key(seed):
    """Root key for a master seed (any integer that fits in 64 bits)."""
    return derive(np.uint64(int(seed) & 0xFFFFFFFFFFFFFFFF), ROOT)


def uniform(keys):
    """Uniform variates on [0, 1)."""
    return (mix64(keys) >> _S11).astype(np.float64) * _TWO53


def uniform_open(keys):
    """Uniform variates on the open interval (0, 1)."""
    return ((mix64(keys) >> _S11).astype(np.float64) + 0.5) * _TWO53


def normal(keys):
    """Standard normal variates by inverse transform."""
    return ndtri(uniform_open(keys))


def exponential(keys, rate):
    """Exponential variates with the given rate; ``inf`` when the rate is 0."""
    e = -np.log(uniform_open(keys))
    if rate <= 0.0:
        return np.full(e.shape, np.inf)
    return e / rate


def normal_vectors(keys, d):
    """Array of shape ``keys.shape + (d,)`` of independent standard normals."""
    keys = np.asarray(keys, dtype=np.uint64)
    comp = np.arange(d, dtype=np.uint64)
    return normal(derive(keys[..., None], comp))
