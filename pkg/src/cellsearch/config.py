"""Run configuration: a YAML file with network, quadrature, protocol,
sweep and design blocks, plus command-line overrides.

Unknown keys are rejected so that a typo never silently falls back to a
default. Errors name the offending field (``network.lambda: ...``) and, for
YAML syntax errors, the line.
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import yaml

from .analytic import QuadratureConfig
from .errors import ParameterError
from .model import NetworkParams
from .montecarlo import ProtocolConfig

SWEEP_VARIABLES = ("lambda", "n_c", "n_bs", "k")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class SweepSpec:
    variable: str
    values: tuple

    def __post_init__(self):
        if self.variable not in SWEEP_VARIABLES:
            raise ConfigError(f"sweep.variable: must be one of {SWEEP_VARIABLES}, got {self.variable!r}")
        if not self.values:
            raise ConfigError("sweep.values: must be non-empty")
        if self.variable != "lambda":
            for v in self.values:
                if float(v) != int(v) or int(v) < 1:
                    raise ConfigError(f"sweep.values: {self.variable} needs positive integers, got {v!r}")
            object.__setattr__(self, "values", tuple(int(v) for v in self.values))
        else:
            object.__setattr__(self, "values", tuple(float(v) for v in self.values))


@dataclass(frozen=True)
class DesignSpec:
    p_f_max: float = 0.15
    k: int = 1
    n_bs_min: int = 1
    n_bs_max: int = 64
    n_ue_values: Optional[tuple] = None


@dataclass(frozen=True)
class RunConfig:
    network: NetworkParams = field(default_factory=NetworkParams)
    quadrature: QuadratureConfig = field(default_factory=QuadratureConfig)
    protocol: ProtocolConfig = field(default_factory=ProtocolConfig)
    sweep: Optional[SweepSpec] = None
    design: DesignSpec = field(default_factory=DesignSpec)
    output: str = "out"
    seed: int = 0
    trials: int = 10000
    workers: int = 1
    figure_sim_trials: int = 0

    def to_dict(self) -> dict:
        net = dataclasses.asdict(self.network)
        net["lambda"] = net.pop("lam")
        out = {
            "network": net,
            "quadrature": dataclasses.asdict(self.quadrature),
            "protocol": dataclasses.asdict(self.protocol),
            "design": {k: (list(v) if isinstance(v, tuple) else v)
                       for k, v in dataclasses.asdict(self.design).items()},
            "output": self.output,
            "seed": self.seed,
            "trials": self.trials,
            "workers": self.workers,
            "figure_sim_trials": self.figure_sim_trials,
        }
        if self.sweep is not None:
            out["sweep"] = {"variable": self.sweep.variable, "values": list(self.sweep.values)}
        return out

    def dump(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False)


def _block(raw, name, cls, rename=None):
    data = raw.get(name) or {}
    if not isinstance(data, dict):
        raise ConfigError(f"{name}: expected a mapping")
    rename = rename or {}
    known = {f.name: f for f in dataclasses.fields(cls)}
    kwargs = {}
    for key, value in data.items():
        target = rename.get(key, key)
        if target not in known:
            raise ConfigError(f"{name}.{key}: unknown field")
        kwargs[target] = _coerce_number(value, known[target], f"{name}.{key}")
    try:
        return cls(**kwargs)
    except (ParameterError, TypeError, ValueError) as exc:
        raise ConfigError(f"{name}: {exc}") from exc


def _coerce_number(value, fld, where):
    # YAML 1.1 reads exponents without a sign (28.0e9) as strings
    if isinstance(value, str) and not isinstance(fld.default, str):
        try:
            return float(value)
        except ValueError:
            raise ConfigError(f"{where}: expected a number, got {value!r}") from None
    return value


def expand_values(spec) -> list:
    """Sweep values from an explicit list or a ``{start, stop, num, scale}`` range."""
    if isinstance(spec, (list, tuple)):
        return list(spec)
    if isinstance(spec, dict):
        try:
            start, stop, num = float(spec["start"]), float(spec["stop"]), int(spec["num"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"sweep.range: needs start, stop and num ({exc})") from exc
        scale = spec.get("scale", "linear")
        if scale == "log":
            if start <= 0 or stop <= 0:
                raise ConfigError("sweep.range: log scale needs positive bounds")
            return list(np.logspace(math.log10(start), math.log10(stop), num))
        if scale == "linear":
            return list(np.linspace(start, stop, num))
        raise ConfigError(f"sweep.range.scale: must be 'log' or 'linear', got {scale!r}")
    raise ConfigError("sweep.values: expected a list or a range mapping")


def from_dict(raw: dict) -> RunConfig:
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError("top level: expected a mapping")
    allowed = {"network", "quadrature", "protocol", "sweep", "design", "output", "seed",
               "trials", "workers", "figure_sim_trials"}
    for key in raw:
        if key not in allowed:
            raise ConfigError(f"{key}: unknown field")
    network = _block(raw, "network", NetworkParams, rename={"lambda": "lam"})
    quadrature = _block(raw, "quadrature", QuadratureConfig)
    protocol = _block(raw, "protocol", ProtocolConfig)
    design = _block(raw, "design", DesignSpec)
    if design.n_ue_values is not None:
        design = dataclasses.replace(design, n_ue_values=tuple(design.n_ue_values))
    sweep = None
    if raw.get("sweep"):
        s = raw["sweep"]
        if not isinstance(s, dict) or "variable" not in s:
            raise ConfigError("sweep: expected a mapping with 'variable'")
        extra = set(s) - {"variable", "values", "range"}
        if extra:
            raise ConfigError(f"sweep.{sorted(extra)[0]}: unknown field")
        if ("values" in s) == ("range" in s):
            raise ConfigError("sweep: give exactly one of 'values' or 'range'")
        sweep = SweepSpec(s["variable"], tuple(expand_values(s.get("values", s.get("range")))))
    cfg = RunConfig(
        network=network, quadrature=quadrature, protocol=protocol, sweep=sweep, design=design,
        output=str(raw.get("output", "out")),
        seed=_int_field(raw, "seed", 0, minimum=0),
        trials=_int_field(raw, "trials", 10000, minimum=1),
        workers=_int_field(raw, "workers", 1, minimum=1),
        figure_sim_trials=_int_field(raw, "figure_sim_trials", 0, minimum=0),
    )
    return cfg


def _int_field(raw, name, default, minimum):
    value = raw.get(name, default)
    if isinstance(value, bool) or not isinstance(value, (int, float)) or int(value) != value:
        raise ConfigError(f"{name}: expected an integer, got {value!r}")
    if value < minimum:
        raise ConfigError(f"{name}: must be >= {minimum}, got {value!r}")
    return int(value)


def load(path) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            raw = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from exc
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f"{path}:{mark.line + 1}" if mark is not None else str(path)
        raise ConfigError(f"{where}: {getattr(exc, 'problem', exc)}") from exc
    try:
        return from_dict(raw)
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def loads(text: str) -> RunConfig:
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ConfigError(f"line {mark.line + 1 if mark else '?'}: {exc}") from exc
    return from_dict(raw)


def with_overrides(cfg: RunConfig, **overrides) -> RunConfig:
    """Apply command-line overrides; ``None`` values are ignored."""
    net, proto, quad, design, top = {}, {}, {}, {}, {}
    mapping = {
        "lam": net, "n_bs": net, "n_ue": net, "sinr_threshold": net, "t0_seconds": net,
        "n_c": proto, "mode": proto, "bs_schedule": proto, "ue_schedule": proto,
        "fresh_topology_per_slot": proto, "rel_tol": quad,
        "p_f_max": design, "k": design, "n_bs_min": design, "n_bs_max": design,
        "seed": top, "trials": top, "output": top, "workers": top,
    }
    for key, value in overrides.items():
        if value is None:
            continue
        mapping[key][key] = value
    try:
        if net:
            cfg = dataclasses.replace(cfg, network=cfg.network.replace(**net))
        if proto:
            cfg = dataclasses.replace(cfg, protocol=dataclasses.replace(cfg.protocol, **proto))
        if quad:
            cfg = dataclasses.replace(cfg, quadrature=dataclasses.replace(cfg.quadrature, **quad))
        if design:
            cfg = dataclasses.replace(cfg, design=dataclasses.replace(cfg.design, **design))
    except (ParameterError, ValueError) as exc:
        raise ConfigError(f"command line: {exc}") from exc
    if top:
        cfg = dataclasses.replace(cfg, **top)
        for name in ("trials", "workers"):
            if getattr(cfg, name) < 1:
                raise ConfigError(f"--{name}: must be >= 1")
    return cfg
