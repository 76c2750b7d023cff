"""Run configuration: a single JSON document, strictly validated.

Unknown keys are rejected with their dotted path and line number.  The
canonical form (sorted keys, two-space indent) is what gets hashed, with the
output directory left out so that relocating a run does not change its hash.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import re
from dataclasses import dataclass, field
from typing import Any

__all__ = [
    "ConfigError",
    "ScenarioConfig",
    "InitConfig",
    "GridConfig",
    "SimulateConfig",
    "ReferenceConfig",
    "ReplicaConfig",
    "StudyConfig",
    "DistanceConfig",
    "CheckConfig",
    "ValueConfig",
    "RunConfig",
    "load_config",
    "parse_config",
]


class ConfigError(ValueError):
    """Invalid configuration; the message names the key and, when known, the line."""


@dataclass
class ScenarioConfig:
    family: str = "constant"
    params: dict = field(default_factory=dict)
    dim: int = 1
    bounds: dict | None = None


@dataclass
class InitConfig:
    count: float = 1.0
    mean: Any = 0.0
    std: float = 1.0
    law: str = "fixed"


@dataclass
class GridConfig:
    horizon: float = 1.0
    dt: float = 1 / 32


@dataclass
class SimulateConfig:
    N: int = 16
    replicas: int = 1
    record: Any = "all"
    cap: int = 1_000_000


@dataclass
class ReferenceConfig:
    Mp: int = 4096
    method: str = "self-interaction"
    iterations: int = 3


@dataclass
class ReplicaConfig:
    r0: int = 64
    n0: int = 8
    power: float = 2.0
    cap: int = 100_000
    minimum: int = 2


@dataclass
class StudyConfig:
    N_list: list = field(default_factory=lambda: [8, 16, 32, 64, 128, 256])
    replicas: ReplicaConfig = field(default_factory=ReplicaConfig)
    Mp: int | None = None
    functional: dict = field(default_factory=lambda: {
        "inner": [{"name": "tanh-coordinate"}],
        "outer": {"kind": "quadratic", "A": [[2.0]]},
    })


@dataclass
class DistanceConfig:
    mu: str = ""
    nu: str = ""
    radius: float = 0.0
    witness: bool = False


@dataclass
class CheckConfig:
    N: int = 8
    replicas: int = 500
    Mp: int = 4096
    pairs: int = 200


@dataclass
class ValueConfig:
    times: list = field(default_factory=lambda: [0.0, 0.25, 0.5, 0.75])
    Mp: int = 4096
    measure: str | None = None
    functional: dict = field(default_factory=lambda: {
        "inner": [{"name": "gaussian-bump", "center": 0.5, "width": 1.0}],
        "outer": {"kind": "linear", "coef": [1.0]},
    })
    check: bool = False


@dataclass
class RunConfig:
    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    init: InitConfig = field(default_factory=InitConfig)
    grid: GridConfig = field(default_factory=GridConfig)
    seed: int = 0
    output: str = "out"
    simulate: SimulateConfig = field(default_factory=SimulateConfig)
    reference: ReferenceConfig = field(default_factory=ReferenceConfig)
    study: StudyConfig = field(default_factory=StudyConfig)
    distance: DistanceConfig = field(default_factory=DistanceConfig)
    check: CheckConfig = field(default_factory=CheckConfig)
    value: ValueConfig = field(default_factory=ValueConfig)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def canonical(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    def sha256(self) -> str:
        d = self.to_dict()
        d.pop("output")
        return hashlib.sha256(json.dumps(d, sort_keys=True, indent=2).encode("utf-8")).hexdigest()

    def provenance(self) -> str:
        return f"config_sha256={self.sha256()} seed={self.seed}"


def _line_of(text: str | None, key: str) -> str:
    if not text:
        return ""
    m = re.search(r'"%s"\s*:' % re.escape(key), text)
    return f" (line {text.count(chr(10), 0, m.start()) + 1})" if m else ""


def _build(cls, data, path: str, text: str | None):
    if not isinstance(data, dict):
        raise ConfigError(f"{path or 'config'}: expected an object, got {type(data).__name__}")
    fields = {f.name: f for f in dataclasses.fields(cls)}
    kwargs = {}
    for key, val in data.items():
        where = f"{path}.{key}" if path else key
        if key not in fields:
            raise ConfigError(f"unknown key '{where}'{_line_of(text, key)}; allowed: {sorted(fields)}")
        ftype = fields[key].type
        sub = _NESTED.get((cls, key))
        if sub is not None:
            kwargs[key] = _build(sub, val, where, text)
        else:
            kwargs[key] = _coerce(val, ftype, where, text, key)
    return cls(**kwargs)


def _coerce(val, ftype: str, where: str, text, key):
    ftype = ftype if isinstance(ftype, str) else getattr(ftype, "__name__", str(ftype))
    if ftype == "int" and not (isinstance(val, int) and not isinstance(val, bool)):
        raise ConfigError(f"'{where}'{_line_of(text, key)} must be an integer, got {val!r}")
    if ftype == "float" and not (isinstance(val, (int, float)) and not isinstance(val, bool)):
        raise ConfigError(f"'{where}'{_line_of(text, key)} must be a number, got {val!r}")
    if ftype == "float":
        return float(val)
    if ftype == "str" and not isinstance(val, str):
        raise ConfigError(f"'{where}'{_line_of(text, key)} must be a string, got {val!r}")
    if ftype == "bool" and not isinstance(val, bool):
        raise ConfigError(f"'{where}'{_line_of(text, key)} must be true or false, got {val!r}")
    return val


_NESTED = {
    (RunConfig, "scenario"): ScenarioConfig,
    (RunConfig, "init"): InitConfig,
    (RunConfig, "grid"): GridConfig,
    (RunConfig, "simulate"): SimulateConfig,
    (RunConfig, "reference"): ReferenceConfig,
    (RunConfig, "study"): StudyConfig,
    (RunConfig, "distance"): DistanceConfig,
    (RunConfig, "check"): CheckConfig,
    (RunConfig, "value"): ValueConfig,
    (StudyConfig, "replicas"): ReplicaConfig,
}


def parse_config(text: str) -> RunConfig:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config parse error at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    cfg = _build(RunConfig, data, "", text)
    if not 0 <= cfg.seed < 2 ** 64:
        raise ConfigError(f"'seed'{_line_of(text, 'seed')} must be an unsigned 64-bit integer")
    return cfg


def load_config(path) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())
