"""Result persistence: CSV files, plain-text rate tables and a run manifest."""
from __future__ import annotations

import csv
import datetime
import json
import os
import platform
import subprocess

import numpy as np

from . import _accel
from .experiments import ERROR_KEYS, ExperimentRecord, VibrationRecord

_FMT = ".17g"
LABELS = {"u_L2": "||u-u_h||", "u_H1": "||u-u_h||_1", "p_L2": "||p-p_h||", "w_L2": "||w-w_h||",
          "w_H1": "||w-w_h||_1", "z_L2": "||z-z_h||", "z_H1": "||z-z_h||_1"}


def _num(v):
    return "" if v is None else format(float(v), _FMT)


def record_columns(records):
    keys = list(records[0].errors)
    return ["level", "step"] + keys + [f"rate_{k}" for k in keys] + \
        ["wall_time", "iterations_mean", "iterations_max", "g_L2"]


def write_records_csv(path, records):
    keys = list(records[0].errors)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(record_columns(records))
        for r in records:
            w.writerow([_num(r.level), _num(r.step)] + [_num(r.errors[k]) for k in keys]
                       + [_num(r.rates.get(k)) for k in keys]
                       + [_num(r.wall_time), _num(r.iterations_mean), str(int(r.iterations_max)), _num(r.g_L2)])


def read_records_csv(path):
    out = []
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    for row in rows:
        keys = [c for c in row if c not in ("level", "step", "wall_time", "iterations_mean", "iterations_max", "g_L2")
                and not c.startswith("rate_")]
        f = lambda s: None if s == "" else float(s)
        out.append(ExperimentRecord(
            level=float(row["level"]), step=float(row["step"]),
            errors={k: float(row[k]) for k in keys},
            rates={k: f(row[f"rate_{k}"]) for k in keys},
            wall_time=float(row["wall_time"]), iterations_mean=float(row["iterations_mean"]),
            iterations_max=int(row["iterations_max"]), g_L2=float(row["g_L2"]),
        ))
    return out


def rate_table(records, step_name="h"):
    """Text table with one error and one rate column per quantity."""
    keys = list(records[0].errors)
    head = f"{step_name:>10} " + " ".join(f"{LABELS.get(k, k):>14} {'rate':>6}" for k in keys)
    lines = [head, "-" * len(head)]
    for r in records:
        step = f"1/{round(1 / r.step)}" if abs(1 / r.step - round(1 / r.step)) < 1e-9 else f"{r.step:g}"
        cells = []
        for k in keys:
            rate = r.rates.get(k)
            cells.append(f"{r.errors[k]:>14.3e} {'' if rate is None else f'{rate:.2f}':>6}")
        lines.append(f"{step:>10} " + " ".join(cells))
    return "\n".join(lines) + "\n"


def write_vibration_csv(path, rec):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(VibrationRecord.COLUMNS)
        cols = [getattr(rec, c) for c in VibrationRecord.COLUMNS]
        for row in zip(*cols):
            w.writerow([_num(v) for v in row])


def write_infsup_csv(path, sweep):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["h", "beta_h"])
        for h, b in sweep:
            w.writerow([_num(h), _num(b)])


def _git_revision():
    try:
        here = os.path.dirname(os.path.abspath(__file__))
        return subprocess.run(["git", "rev-parse", "HEAD"], cwd=here, capture_output=True, text=True,
                              timeout=5).stdout.strip() or None
    except (OSError, subprocess.SubprocessError):
        return None


def manifest(config=None, checks=None):
    import scipy
    from . import __version__
    return {
        "created": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        "package_version": __version__,
        "git_revision": _git_revision(),
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "kernel_backend": _accel.backend(),
        "config": None if config is None else config.as_dict(),
        "checks": None if checks is None else [
            {"name": c.name, "value": c.value, "limit": c.limit, "passed": c.passed} for c in checks],
    }


def emit_results(result, directory, name="results", config=None, checks=None):
    """Write ``result`` (records, vibration record or inf-sup sweep) into ``directory``.

    Returns the list of written paths. Raises ``OSError`` when the directory
    cannot be created or written.
    """
    if isinstance(result, (list, tuple)) and not result:
        raise ValueError("nothing to write")
    os.makedirs(directory, exist_ok=True)
    paths = []
    csv_path = os.path.join(directory, f"{name}.csv")
    if isinstance(result, VibrationRecord):
        write_vibration_csv(csv_path, result)
        paths.append(csv_path)
    elif isinstance(result[0], ExperimentRecord):
        write_records_csv(csv_path, result)
        table = os.path.join(directory, f"{name}_table.txt")
        step = "dt" if config is not None and config.kind == "converge-time" else "h"
        with open(table, "w") as fh:
            fh.write(rate_table(result, step))
        paths += [csv_path, table]
    else:
        write_infsup_csv(csv_path, result)
        paths.append(csv_path)
    man = os.path.join(directory, "manifest.json")
    with open(man, "w") as fh:
        json.dump(manifest(config, checks), fh, indent=2)
    paths.append(man)
    return paths
