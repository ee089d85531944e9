"""Run configuration: TOML parsing, validation and serialization."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, fields, replace

try:
    import tomllib
except ModuleNotFoundError:          # Python < 3.11
    import tomli as tomllib

from .coupled import CouplingConfig, Mode
from .errors import ConfigurationError, FSIError
from .params import VIBRATION_PARAMS, PhysicalParams

KINDS = ("converge-space", "converge-time", "vibrate", "infsup", "single-solve")
_ALIASES = {"solve": "single-solve"}


@dataclass(frozen=True)
class RunConfig:
    kind: str = "converge-space"
    levels: tuple = (2, 4, 8)        # mesh levels n (h = 1/n) for space / infsup sweeps
    n: int = 8                       # fixed mesh for time sweeps, vibration and single solves
    dts: tuple = (0.5, 0.25, 0.125)  # time steps of the temporal sweep
    dt: float = 1e-4
    t_final: float = 1e-3
    depth: float = 1.0               # fluid depth below the plate
    amplitude: float = 1e-2          # initial plate deflection amplitude (vibrate)
    params: PhysicalParams = field(default_factory=PhysicalParams)
    coupling: CouplingConfig = field(default_factory=CouplingConfig)
    out: str = "results"
    seed: int = 0
    check: bool = False              # evaluate acceptance thresholds and set the exit code
    max_level_override: int = 8      # largest n accepted in sweeps

    def as_dict(self):
        d = asdict(self)
        d["levels"], d["dts"] = list(self.levels), list(self.dts)
        d["params"] = self.params.as_dict()
        d["coupling"] = {
            "mode": self.coupling.mode.value, "tol": self.coupling.tol, "max_iter": self.coupling.max_iter,
            "theta": self.coupling.theta, "form": self.coupling.form,
        }
        return d


def preset(kind):
    """Defaults for one experiment kind."""
    kind = _ALIASES.get(kind, kind)
    if kind not in KINDS:
        raise ConfigurationError("kind", f"unknown experiment kind {kind!r}")
    base = RunConfig(kind=kind)
    if kind == "converge-time":
        return replace(base, t_final=1.0, params=PhysicalParams(omega=1e5))
    if kind == "vibrate":
        return replace(base, dt=1e-3, t_final=0.1, depth=0.5, params=VIBRATION_PARAMS)
    if kind == "infsup":
        return replace(base, levels=(2, 3, 4))
    if kind == "single-solve":
        return replace(base, n=4, t_final=3e-4)
    return base


_TOP = {f.name for f in fields(RunConfig)} - {"params", "coupling"}
_PARAM_KEYS = {f.name for f in fields(PhysicalParams)}
_COUPLING_KEYS = {"mode", "tol", "max_iter", "theta", "form"}


def _real(key, v):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigurationError(key, f"expected a number, got {type(v).__name__}")
    v = float(v)
    if not math.isfinite(v):
        raise ConfigurationError(key, "must be finite")
    return v


def _int(key, v):
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigurationError(key, f"expected an integer, got {type(v).__name__}")
    return v


def _str(key, v):
    if not isinstance(v, str):
        raise ConfigurationError(key, f"expected a string, got {type(v).__name__}")
    return v


def _positive(key, v):
    if not v > 0:
        raise ConfigurationError(key, "must be positive")
    return v


def _validate_top(key, v):
    if key == "kind":
        v = _ALIASES.get(_str(key, v), v)
        if v not in KINDS:
            raise ConfigurationError(key, f"must be one of {', '.join(KINDS)}")
        return v
    if key == "levels":
        if not isinstance(v, (list, tuple)) or not v:
            raise ConfigurationError(key, "expected a non-empty list of integers")
        v = tuple(_positive(key, _int(key, x)) for x in v)
        if list(v) != sorted(set(v)):
            raise ConfigurationError(key, "levels must be strictly ascending")
        return v
    if key == "dts":
        if not isinstance(v, (list, tuple)) or not v:
            raise ConfigurationError(key, "expected a non-empty list of numbers")
        v = tuple(_positive(key, _real(key, x)) for x in v)
        if list(v) != sorted(set(v), reverse=True):
            raise ConfigurationError(key, "time steps must be strictly descending")
        return v
    if key in ("n", "max_level_override"):
        return _positive(key, _int(key, v))
    if key == "seed":
        return _int(key, v)
    if key in ("dt", "t_final", "depth"):
        return _positive(key, _real(key, v))
    if key == "amplitude":
        return _real(key, v)
    if key == "out":
        return _str(key, v)
    if key == "check":
        if not isinstance(v, bool):
            raise ConfigurationError(key, "expected true or false")
        return v
    raise ConfigurationError(key, "unknown key")


def build_config(doc, base=None):
    """Validate a parsed mapping into a :class:`RunConfig` layered over ``base``."""
    if not isinstance(doc, dict):
        raise ConfigurationError("<root>", "expected a table")
    if base is None:
        kind = doc.get("kind", "converge-space")
        base = preset(_validate_top("kind", kind))
    doc = _lift_params(doc)
    updates = {}
    for key, v in doc.items():
        if key in ("params", "coupling"):
            continue
        if key not in _TOP:
            raise ConfigurationError(key, "unknown key")
        updates[key] = _validate_top(key, v)

    p = base.params.as_dict()
    for key, v in _section(doc, "params").items():
        if key not in _PARAM_KEYS:
            raise ConfigurationError(f"params.{key}", "unknown key")
        p[key] = _real(f"params.{key}", v)
    try:
        params = PhysicalParams(**p)
    except FSIError as exc:
        bad = next((k for k in p if k in str(exc)), "params")
        raise ConfigurationError(f"params.{bad}" if bad != "params" else bad, str(exc)) from exc

    c = {"mode": base.coupling.mode.value, "tol": base.coupling.tol, "max_iter": base.coupling.max_iter,
         "theta": base.coupling.theta, "form": base.coupling.form}
    for key, v in _section(doc, "coupling").items():
        if key not in _COUPLING_KEYS:
            raise ConfigurationError(f"coupling.{key}", "unknown key")
        if key in ("mode", "form"):
            c[key] = _str(f"coupling.{key}", v)
        elif key == "max_iter":
            c[key] = _int(f"coupling.{key}", v)
        else:
            c[key] = _real(f"coupling.{key}", v)
    if c["mode"] not in tuple(m.value for m in Mode):
        raise ConfigurationError("coupling.mode", "must be 'partitioned' or 'monolithic'")
    try:
        coupling = CouplingConfig(**c)
    except FSIError as exc:
        bad = next((k for k in c if k in str(exc)), "coupling")
        raise ConfigurationError(f"coupling.{bad}", str(exc)) from exc

    cfg = replace(base, params=params, coupling=coupling, **updates)
    if max(cfg.levels) > cfg.max_level_override:
        raise ConfigurationError("levels", f"level {max(cfg.levels)} exceeds max_level_override = {cfg.max_level_override}")
    if cfg.n > cfg.max_level_override:
        raise ConfigurationError("n", f"n = {cfg.n} exceeds max_level_override = {cfg.max_level_override}")
    return cfg


def _lift_params(doc):
    """Accept physical parameters (e.g. ``omega = 1e5``) at the top level."""
    top = {k: v for k, v in doc.items() if k in _PARAM_KEYS}
    if not top:
        return doc
    params = dict(_section(doc, "params"))
    for k, v in top.items():
        if k in params:
            raise ConfigurationError(k, "given both at the top level and in [params]")
        params[k] = v
    out = {k: v for k, v in doc.items() if k not in _PARAM_KEYS}
    out["params"] = params
    return out


def _section(doc, name):
    sec = doc.get(name, {})
    if not isinstance(sec, dict):
        raise ConfigurationError(name, "expected a table")
    return sec


def parse_config(source, base=None):
    """Parse a TOML document into a validated :class:`RunConfig`."""
    try:
        doc = tomllib.loads(source)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigurationError("<document>", str(exc)) from exc
    return build_config(doc, base)


def _toml_value(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, str):
        return '"' + v.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_toml_value(x) for x in v) + "]"
    raise TypeError(type(v))


def dump_config(cfg):
    """TOML text that :func:`parse_config` maps back to ``cfg``."""
    d = cfg.as_dict()
    lines = [f"{k} = {_toml_value(v)}" for k, v in d.items() if k not in ("params", "coupling")]
    for sec in ("params", "coupling"):
        lines.append(f"\n[{sec}]")
        lines += [f"{k} = {_toml_value(v)}" for k, v in d[sec].items()]
    return "\n".join(lines) + "\n"
