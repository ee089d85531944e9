"""Pass/fail thresholds applied to experiment results.

Each check returns a list of :class:`Check` items so callers can print one
line per quantity and combine them into an exit code.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

SPACE_RATE_MIN = {"u_L2": 2.3, "u_H1": 1.4, "w_H1": 1.5, "z_L2": 2.2, "p_L2": 2.0}
TIME_RATE_BAND = {"u_L2": (0.8, 1.2), "u_H1": (0.8, 1.2)}
TIME_W_RATE_MIN = 1.5
FLAT_ERROR_SPREAD = 0.2
AGREEMENT_TOL = 1e-7
ENERGY_SLACK = 1e-12
MISMATCH_RATIO = 1e-3
MISMATCH_TIMES = (0.01, 0.05, 0.1)
FLUX_TOL = 1e-10
INFSUP_RATIO = 0.5


@dataclass(frozen=True)
class Check:
    name: str
    value: float
    limit: str
    passed: bool

    def __post_init__(self):
        object.__setattr__(self, "value", float(self.value))
        object.__setattr__(self, "passed", bool(self.passed))

    def line(self):
        return f"{'PASS' if self.passed else 'FAIL'}  {self.name} = {self.value:.6g} (required {self.limit})"


def space_convergence(records):
    last = records[-1].rates
    return [Check(f"{k} rate", float(last[k]), f">= {v}", bool(last[k] is not None and last[k] >= v))
            for k, v in SPACE_RATE_MIN.items()]


def time_convergence(records):
    last = records[-1].rates
    out = [Check(f"{k} rate", float(last[k]), f"in [{lo}, {hi}]", bool(lo <= last[k] <= hi))
           for k, (lo, hi) in TIME_RATE_BAND.items()]
    out.append(Check("w_L2 rate", float(last["w_L2"]), f">= {TIME_W_RATE_MIN}", bool(last["w_L2"] >= TIME_W_RATE_MIN)))
    return out


def flat_errors(records, key="u_L2"):
    e = np.array([r.errors[key] for r in records])
    spread = float((e.max() - e.min()) / e.min())
    return [Check(f"{key} relative spread", spread, f"< {FLAT_ERROR_SPREAD}", spread < FLAT_ERROR_SPREAD)]


def relative_difference(a, b):
    nb = np.linalg.norm(b)
    d = np.linalg.norm(np.asarray(a) - np.asarray(b))
    return float(d / nb) if nb > 0 else float(d)


def agreement(state_a, state_b, keys=("u", "p0", "w", "z", "g")):
    out = []
    for k in keys:
        d = relative_difference(getattr(state_a, k), getattr(state_b, k))
        out.append(Check(f"{k} relative difference", d, f"<= {AGREEMENT_TOL:g}", d <= AGREEMENT_TOL))
    return out


def vibration(rec, amplitude):
    E = rec.total_energy
    rise = float(np.max(np.diff(E))) if E.size > 1 else 0.0
    out = [
        Check("max energy increase / E0", rise / E[0], f"<= {ENERGY_SLACK:g}", rise <= ENERGY_SLACK * E[0]),
        Check("final max displacement", float(rec.max_displacement[-1]), f"< {amplitude:g}",
              bool(rec.max_displacement[-1] < amplitude)),
    ]
    for t in MISMATCH_TIMES:
        i = rec.at(t)
        ratio = float(rec.interface_mismatch[i] / rec.peak_wdot[i]) if rec.peak_wdot[i] > 0 else 0.0
        out.append(Check(f"interface mismatch / peak |wdot| at t={t:g}", ratio, f"<= {MISMATCH_RATIO:g}",
                         ratio <= MISMATCH_RATIO))
    flux = float(np.max(np.abs(rec.wdot_integral)))
    out.append(Check("max |int wdot|", flux, f"<= {FLUX_TOL:g}", flux <= FLUX_TOL))
    return out


def infsup(sweep):
    betas = np.array([b for _, b in sweep])
    ratio = float(betas.min() / betas.max())
    return [Check("beta_h min > 0", float(betas.min()), "> 0", bool(betas.min() > 0)),
            Check("beta_h min/max", ratio, f">= {INFSUP_RATIO}", ratio >= INFSUP_RATIO)]
