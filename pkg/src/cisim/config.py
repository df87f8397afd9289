"""Run configuration: sectioned key = value files, ``--set`` overrides, manifests.

A config file looks like::

    [model]
    gamma = 0.1
    delta = 0.0

    [grid]
    nx = 193
    ny = 193

Every section and key is optional; omitted values take the defaults of
:class:`RunConfig`. Unknown sections or keys are rejected with the key and
the line where it appeared.
"""

from __future__ import annotations

import configparser
import dataclasses
import hashlib
import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError
from .model import ModelParams

__all__ = ["RunConfig", "parse_config", "load_config", "config_hash"]


@dataclass
class ModelSection:
    omega1: float = 1.0
    omega2: float = 1.0
    a: float = 4.0
    delta: float = 0.0
    c: float | None = None
    gamma: float | None = None


@dataclass
class GridSection:
    nx: int = 193
    ny: int = 193
    padding: float | None = None
    extents: tuple[float, float, float, float] | None = None
    energy_cap: float = 20.0
    order: int = 4


@dataclass
class SolverSection:
    m: int = 8
    tol: float = 1e-9
    seed: int = 0
    degeneracy_tol: float = 1e-6
    kinds: tuple[str, ...] = ("BO", "GP", "FULL")


@dataclass
class DynamicsSection:
    temperatures: tuple[float, ...] = (0.0,)
    t_max: float = 100.0
    samples: int = 500
    tol: float = 1e-12
    eps: float = 1e-4
    gp_dress_initial: bool = False
    nx: int | None = None  # grid override for propagation
    ny: int | None = None


@dataclass
class SweepSection:
    gammas: tuple[float, ...] = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 2.0 / 3.0)
    delta_min: float = 0.0
    delta_max: float = 2.0
    delta_step: float = 0.02
    kind: str = "GP"
    state: int = 1
    selector: str = "symmetry"


@dataclass
class RunSection:
    out: str = "out"


_SECTIONS = {
    "model": ModelSection,
    "grid": GridSection,
    "solver": SolverSection,
    "dynamics": DynamicsSection,
    "sweep": SweepSection,
    "run": RunSection,
}


@dataclass
class RunConfig:
    model: ModelSection = field(default_factory=ModelSection)
    grid: GridSection = field(default_factory=GridSection)
    solver: SolverSection = field(default_factory=SolverSection)
    dynamics: DynamicsSection = field(default_factory=DynamicsSection)
    sweep: SweepSection = field(default_factory=SweepSection)
    run: RunSection = field(default_factory=RunSection)

    def params(self) -> ModelParams:
        m = self.model
        return ModelParams(omega1=m.omega1, omega2=m.omega2, a=m.a, delta=m.delta, c=m.c)

    def delta_grid(self):
        s = self.sweep
        n = int(round((s.delta_max - s.delta_min) / s.delta_step)) + 1
        return [s.delta_min + i * s.delta_step for i in range(n)]

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)


# -- value conversion -----------------------------------------------------------

_FALSE = {"0", "false", "no", "off"}
_TRUE = {"1", "true", "yes", "on"}


def _floats(text: str) -> tuple[float, ...]:
    parts = [t for t in re.split(r"[,\s]+", text.strip()) if t]
    return tuple(_number(t) for t in parts)


def _number(text: str) -> float:
    text = text.strip()
    if "/" in text:  # allow simple fractions such as 2/3
        num, den = text.split("/", 1)
        return float(num) / float(den)
    return float(text)


def _convert(section: str, key: str, raw: str):
    kind = _field_types(section)[key]
    raw = raw.strip()
    if raw.lower() in ("", "none") and "None" in kind:
        return None
    if kind.startswith("bool"):
        low = raw.lower()
        if low in _TRUE:
            return True
        if low in _FALSE:
            return False
        raise ValueError(f"not a boolean: {raw!r}")
    if kind.startswith("int"):
        return int(raw)
    if kind.startswith("float"):
        return _number(raw)
    if kind.startswith("tuple[float"):
        values = _floats(raw)
        if kind.startswith("tuple[float, float, float, float]") and len(values) != 4:
            raise ValueError("extents need x_min, x_max, y_min, y_max")
        return values
    if kind.startswith("tuple[str"):
        return tuple(t.upper() for t in re.split(r"[,\s]+", raw) if t)
    return raw


def _field_types(section: str) -> dict[str, str]:
    return {f.name: str(f.type) for f in dataclasses.fields(_SECTIONS[section])}


# -- parsing ----------------------------------------------------------------------

def _key_lines(text: str) -> dict[tuple[str, str], int]:
    """Line number of every ``key = value`` entry, keyed by (section, key)."""
    lines = {}
    section = None
    for n, line in enumerate(text.splitlines(), start=1):
        s = line.strip()
        if not s or s[0] in "#;":
            continue
        head = re.fullmatch(r"\[([^\]]+)\]", s)
        if head:
            section = head.group(1).strip().lower()
            lines[(section, "")] = n
            continue
        key = re.split(r"[=:]", s, maxsplit=1)[0].strip().lower()
        lines.setdefault((section, key), n)
    return lines


def _apply(cfg: RunConfig, section: str, key: str, raw, line: int | None):
    section, key = section.lower(), key.lower().replace("-", "_")
    if section not in _SECTIONS:
        raise ConfigError(f"unknown section [{section}]", key=section, line=line)
    if key not in _field_types(section):
        raise ConfigError(f"unknown key {section}.{key}", key=f"{section}.{key}", line=line)
    try:
        value = _convert(section, key, raw) if isinstance(raw, str) else raw
    except ValueError as exc:
        raise ConfigError(f"bad value for {section}.{key}: {exc}", key=f"{section}.{key}", line=line) from None
    setattr(getattr(cfg, section), key, value)


def _from_json(cfg: RunConfig, data: dict):
    data = data.get("config", data)  # a manifest carries the snapshot under "config"
    for section, entries in data.items():
        if not isinstance(entries, dict):
            raise ConfigError(f"section {section} must be a mapping", key=section)
        for key, value in entries.items():
            if isinstance(value, list):
                value = tuple(value)
            _apply(cfg, section, key, value if value is not None else "none", None)


def _validate(cfg: RunConfig) -> RunConfig:
    m = cfg.model
    for name in ("omega1", "omega2", "a"):
        if not getattr(m, name) > 0:
            raise ConfigError(f"model.{name} must be positive", key=f"model.{name}")
    if m.c is None and m.gamma is None:
        m.c = 0.2
    elif m.c is None:
        m.c = 0.5 * m.gamma * m.omega1**2 * m.a
    elif m.gamma is not None:
        derived = 2.0 * m.c / (m.omega1**2 * m.a)
        if not math.isclose(derived, m.gamma, rel_tol=1e-9, abs_tol=1e-12):
            raise ConfigError(f"c = {m.c} implies gamma = {derived}, but gamma = {m.gamma} was given",
                              key="model.gamma")
    m.gamma = 2.0 * m.c / (m.omega1**2 * m.a)

    positive = {
        "solver.tol": cfg.solver.tol,
        "solver.degeneracy_tol": cfg.solver.degeneracy_tol,
        "dynamics.tol": cfg.dynamics.tol,
        "dynamics.eps": cfg.dynamics.eps,
        "dynamics.t_max": cfg.dynamics.t_max,
        "sweep.delta_step": cfg.sweep.delta_step,
        "grid.energy_cap": cfg.grid.energy_cap,
    }
    for key, value in positive.items():
        if not value > 0:
            raise ConfigError(f"{key} must be positive", key=key)
    if cfg.grid.order not in (2, 4):
        raise ConfigError("grid.order must be 2 or 4", key="grid.order")
    if cfg.solver.m < 1:
        raise ConfigError("solver.m must be at least 1", key="solver.m")
    if cfg.dynamics.samples < 2:
        raise ConfigError("dynamics.samples must be at least 2", key="dynamics.samples")
    if any(t < 0 for t in cfg.dynamics.temperatures):
        raise ConfigError("temperatures must be non-negative", key="dynamics.temperatures")
    if cfg.sweep.delta_max < cfg.sweep.delta_min:
        raise ConfigError("sweep.delta_max is below sweep.delta_min", key="sweep.delta_max")
    if cfg.sweep.selector not in ("symmetry", "overlap"):
        raise ConfigError("sweep.selector must be 'symmetry' or 'overlap'", key="sweep.selector")
    cfg.sweep.kind = cfg.sweep.kind.upper()
    if cfg.sweep.kind not in ("BO", "GP", "FULL"):
        raise ConfigError("sweep.kind must be BO, GP or FULL", key="sweep.kind")
    bad = [k for k in cfg.solver.kinds if k not in ("BO", "GP", "FULL")]
    if bad:
        raise ConfigError(f"unknown model kind(s) {bad}", key="solver.kinds")
    return cfg


def parse_config(path=None, overrides=()) -> RunConfig:
    """Read a config file (INI-style or a JSON manifest) and apply ``section.key=value`` overrides."""
    cfg = RunConfig()
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"config file {path} does not exist", key="--config")
        text = path.read_text()
        if text.lstrip().startswith("{"):
            try:
                _from_json(cfg, json.loads(text))
            except json.JSONDecodeError as exc:
                raise ConfigError(f"invalid JSON: {exc.msg}", key="--config", line=exc.lineno) from None
        else:
            lines = _key_lines(text)
            parser = configparser.ConfigParser(interpolation=None, default_section="__defaults__")
            try:
                parser.read_string(text, source=str(path))
            except configparser.Error as exc:
                line = getattr(exc, "lineno", None)
                raise ConfigError(f"cannot parse {path}: {exc.message}", key="--config", line=line) from None
            for section in parser.sections():
                sec = section.lower()
                if sec not in _SECTIONS:
                    raise ConfigError(f"unknown section [{sec}]", key=sec, line=lines.get((sec, "")))
                for key, raw in parser.items(section):
                    _apply(cfg, sec, key, raw, lines.get((sec, key)))
    for item in overrides:
        if "=" not in item or "." not in item.split("=", 1)[0]:
            raise ConfigError(f"override {item!r} is not section.key=value", key=item)
        lhs, raw = item.split("=", 1)
        section, key = lhs.strip().split(".", 1)
        _apply(cfg, section, key, raw, None)
    return _validate(cfg)


load_config = parse_config


def config_hash(cfg: RunConfig) -> str:
    """sha256 of the canonical JSON of everything except the output location."""
    data = cfg.as_dict()
    data.pop("run")
    blob = json.dumps(data, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()
