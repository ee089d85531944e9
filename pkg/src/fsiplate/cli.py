"""Command-line entry point.

Usage::

    fsiplate converge-space --levels 2 4 8 --out results/space --check
    fsiplate converge-time --dt 0.5 0.25 0.125 --omega 1e5
    fsiplate vibrate --mode partitioned --theta 1
    fsiplate infsup --levels 2 3 4
    fsiplate solve --config run.toml
"""
from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace

from . import checks
from . import coupled as C
from . import experiments as X
from .config import _ALIASES, KINDS, build_config, tomllib
from .errors import ConfigurationError, FSIError
from .results import emit_results

SUBCOMMANDS = ("converge-space", "converge-time", "vibrate", "infsup", "solve")


def _parser():
    p = argparse.ArgumentParser(prog="fsiplate", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", metavar="PATH", help="TOML run configuration")
        s.add_argument("--out", metavar="DIR", help="output directory")
        s.add_argument("--levels", type=int, nargs="+", help="mesh levels n (h = 1/n)")
        s.add_argument("--n", type=int, help="fixed mesh level for time sweeps, vibration and single solves")
        s.add_argument("--dt", type=float, nargs="+", help="time step; several values for converge-time")
        s.add_argument("--t-final", type=float, dest="t_final")
        s.add_argument("--omega", type=float, help="time-derivative scaling of the plate equation")
        s.add_argument("--mode", choices=[m.value for m in C.Mode])
        s.add_argument("--theta", type=float, help="fixed-point relaxation in (0, 1]")
        s.add_argument("--max-level-override", type=int, dest="max_level_override",
                       help="largest mesh level accepted (default 8)")
        s.add_argument("--check", action="store_true", default=None,
                       help="evaluate acceptance thresholds; exit code 1 if any fails")
    return p


def config_from_args(args):
    """Merge the optional TOML file with command-line overrides into a RunConfig."""
    doc = {}
    if args.config:
        with open(args.config, "rb") as fh:
            try:
                doc = tomllib.load(fh)
            except tomllib.TOMLDecodeError as exc:
                raise ConfigurationError("<document>", str(exc)) from exc
    kind = _ALIASES.get(args.command, args.command)
    if "kind" in doc and _ALIASES.get(doc["kind"], doc["kind"]) != kind:
        raise ConfigurationError("kind", f"config kind {doc['kind']!r} does not match subcommand {args.command!r}")
    doc["kind"] = kind
    for key in ("out", "levels", "n", "t_final", "max_level_override", "check"):
        v = getattr(args, key)
        if v is not None:
            doc[key] = v
    if args.dt is not None:
        if kind == "converge-time":
            doc["dts"] = args.dt
        elif len(args.dt) == 1:
            doc["dt"] = args.dt[0]
        else:
            raise ConfigurationError("dt", "several time steps are only accepted by converge-time")
    if args.omega is not None:
        doc.setdefault("params", {})["omega"] = args.omega
    for key in ("mode", "theta"):
        v = getattr(args, key)
        if v is not None:
            doc.setdefault("coupling", {})[key] = v
    return build_config(doc)


def run(cfg):
    """Execute one configured experiment; returns ``(result, checks)``."""
    kind, cp = cfg.kind, cfg.coupling
    if kind == "converge-space":
        result = X.run_space_convergence(cfg.levels, cfg.dt, cfg.t_final, cfg.params, config=cp)
        found = checks.space_convergence(result) if len(result) > 1 else []
    elif kind == "converge-time":
        result = X.run_time_convergence(cfg.dts, cfg.n, cfg.t_final, cfg.params, omega=cfg.params.omega, config=cp)
        if len(result) < 2:
            found = []
        elif cfg.params.omega > 1:
            found = checks.time_convergence(result)
        else:
            found = checks.flat_errors(result)
    elif kind == "vibrate":
        result = X.run_free_vibration(cfg.n, cfg.dt, cfg.t_final, cfg.params, cfg.amplitude,
                                      theta=cp.theta, depth=cfg.depth, config=cp)
        found = checks.vibration(result, cfg.amplitude)
    elif kind == "infsup":
        result = X.run_infsup_sweep(cfg.levels)
        found = checks.infsup(result)
    elif kind == "single-solve":
        rec, state = X.run_mms(cfg.n, cfg.dt, cfg.t_final, cfg.params, cp)
        result = [rec]
        found = []
        if cfg.check:
            other = C.Mode.MONOLITHIC if cp.mode is C.Mode.PARTITIONED else C.Mode.PARTITIONED
            _, state2 = X.run_mms(cfg.n, cfg.dt, cfg.t_final, cfg.params, replace(cp, mode=other))
            found = checks.agreement(state, state2)
    else:  # pragma: no cover - guarded by config validation
        raise ConfigurationError("kind", f"must be one of {', '.join(KINDS)}")
    return result, found


def main(argv=None):
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        cfg = config_from_args(args)
    except (ConfigurationError, OSError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    try:
        result, found = run(cfg)
    except FSIError as exc:
        print(f"run failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    try:
        paths = emit_results(result, cfg.out, name=cfg.kind, config=cfg, checks=found if cfg.check else None)
    except OSError as exc:
        print(f"cannot write results: {exc}", file=sys.stderr)
        return 4
    for p in paths:
        print(f"wrote {p}")
    if not cfg.check:
        return 0
    for c in found:
        print(c.line())
    return 0 if all(c.passed for c in found) else 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
