"""Convergence, free vibration and inf-sup experiment drivers."""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import coupled as C
from .assembly import assemble_mass
from .errors import NoConvergenceError
from .linalg import smallest_generalized_singular_value
from .mms import ExactSolution, error_norm, fluid_forcing, observed_rate, plate_forcing
from .params import VIBRATION_AMPLITUDE, VIBRATION_PARAMS, PhysicalParams

ERROR_KEYS = ("u_L2", "u_H1", "p_L2", "w_L2", "w_H1", "z_L2", "z_H1")


@dataclass
class ExperimentRecord:
    """Final-time errors of one refinement level; ``step`` is h or dt."""

    level: float
    step: float
    errors: dict
    rates: dict = field(default_factory=dict)
    wall_time: float = 0.0
    iterations_mean: float = 0.0
    iterations_max: int = 0
    g_L2: float = 0.0            # the exact multiplier is zero, so this is an error too


@dataclass
class VibrationRecord:
    t: np.ndarray
    max_displacement: np.ndarray
    fluid_kinetic: np.ndarray
    plate_kinetic: np.ndarray
    elastic: np.ndarray
    total_energy: np.ndarray
    interface_mismatch: np.ndarray
    wdot_integral: np.ndarray
    peak_wdot: np.ndarray
    iterations: np.ndarray
    theta: float = 1.0

    COLUMNS = ("t", "max_displacement", "fluid_kinetic", "plate_kinetic", "elastic", "total_energy",
               "interface_mismatch", "wdot_integral", "peak_wdot", "iterations")

    @classmethod
    def from_steps(cls, records, theta=1.0):
        get = lambda name: np.array([getattr(r, name) for r in records])
        return cls(get("t"), get("max_displacement"), get("fluid_kinetic"), get("plate_kinetic") + get("rotational_kinetic"),
                   get("elastic"), get("energy"), get("interface_mismatch"), get("wdot_integral"),
                   get("peak_wdot"), get("iterations"), theta)

    def at(self, t):
        return int(np.argmin(np.abs(self.t - t)))


def attach_rates(records):
    """Fill ``rates`` of each record from its own error columns."""
    if not records:
        return records
    records[0].rates = {k: None for k in records[0].errors}
    steps = [r.step for r in records]
    for key in records[0].errors:
        errs = [r.errors[key] for r in records]
        for i in range(1, len(records)):
            try:
                records[i].rates[key] = observed_rate(errs[i - 1:i + 1], steps[i - 1:i + 1])[0]
            except ValueError:
                records[i].rates[key] = None
    return records


def mms_problem(n, params, **kw):
    exact = ExactSolution()
    return C.CoupledProblem(
        n, params,
        fluid_forcing=lambda x, t: fluid_forcing(x, t, params, exact),
        plate_forcing=lambda x, t: plate_forcing(x, t, params, exact=exact),
        **kw,
    ), exact


def mms_errors(problem, state, exact, t):
    V, Q, W = problem.V, problem.Q, problem.W
    uf, pf, wf, zf = exact.field("u"), exact.field("p"), exact.field("w"), exact.field("z")
    return {
        "u_L2": error_norm(V, state.u, uf, t, "L2"),
        "u_H1": error_norm(V, state.u, uf, t, "H1"),
        "p_L2": error_norm(Q, state.pressure, pf, t, "L2"),
        "w_L2": error_norm(W, state.w, wf, t, "L2"),
        "w_H1": error_norm(W, state.w, wf, t, "H1"),
        "z_L2": error_norm(W, state.z, zf, t, "L2"),
        "z_H1": error_norm(W, state.z, zf, t, "H1"),
    }


def run_mms(n, dt, T, params=None, config=None, problem=None):
    """One manufactured-solution run; returns ``(record, final_state)``."""
    params = params or PhysicalParams()
    config = config or C.CouplingConfig()
    t0 = time.perf_counter()
    if problem is None:
        problem, exact = mms_problem(n, params)
    else:
        exact = ExactSolution()
    state = C.initialize(problem, dt, u0=exact.u, w0=exact.w, w_prev=exact.w, z0=exact.z, z_prev=exact.z)
    state, steps = C.advance(problem, state, dt, T, config)
    its = [r.iterations for r in steps[1:]] or [0]
    rec = ExperimentRecord(
        level=n, step=1.0 / n, errors=mms_errors(problem, state, exact, state.t),
        wall_time=time.perf_counter() - t0, iterations_mean=float(np.mean(its)),
        iterations_max=int(np.max(its)),
        g_L2=error_norm(problem.G, state.g, lambda x: np.zeros(x.shape[0]), None, "L2"),
    )
    return rec, state


def run_space_convergence(levels=(2, 4, 8), dt=1e-4, T=1e-3, params=None, mode="partitioned", config=None):
    """Refine h = 1/n at fixed dt and T."""
    levels = list(levels)
    if levels != sorted(levels):
        raise ValueError("levels must be ascending")
    config = config or C.CouplingConfig(mode=mode)
    out = []
    for n in levels:
        rec, _ = run_mms(n, dt, T, params, config)
        out.append(rec)
    return attach_rates(out)


def run_time_convergence(dts=(0.5, 0.25, 0.125), n=8, T=1.0, params=None, omega=1e5, mode="partitioned", config=None):
    """Refine dt at fixed h = 1/n; ``omega`` scales the plate time derivatives."""
    if omega < 1:
        raise ValueError("omega must be >= 1")
    dts = list(dts)
    if dts != sorted(dts, reverse=True):
        raise ValueError("time steps must be descending")
    params = (params or PhysicalParams()).replace(omega=float(omega))
    config = config or C.CouplingConfig(mode=mode)
    problem, _ = mms_problem(n, params)
    out = []
    for dt in dts:
        rec, _ = run_mms(n, dt, T, params, config, problem=problem)
        rec.level, rec.step = dt, dt
        out.append(rec)
    return attach_rates(out)


def run_free_vibration(n=8, dt=1e-3, T=0.1, params=None, amplitude=VIBRATION_AMPLITUDE, mode="partitioned",
                       theta=1.0, depth=0.5, config=None):
    """Hinged plate released from a sine-mode deflection over a fluid at rest."""
    params = params or VIBRATION_PARAMS
    problem = C.CoupledProblem(n, params, bounds=((0.0, 1.0), (0.0, 1.0), (-depth, 0.0)))
    w0 = lambda x: amplitude * np.sin(2 * np.pi * x[:, 0]) * np.sin(2 * np.pi * x[:, 1])
    for th in (theta, 0.5) if theta > 0.5 else (theta,):
        cfg = config or C.CouplingConfig(mode=mode, theta=th)
        state = C.initialize(problem, dt, w0=w0)
        try:
            _, steps = C.advance(problem, state, dt, T, cfg)
            return VibrationRecord.from_steps(steps, th)
        except NoConvergenceError:
            if config is not None or th <= 0.5:
                raise
    raise AssertionError("unreachable")


def infsup_blocks(problem, dt=None):
    """Coupling block of the multiplier form and its norm matrices.

    Primal side: free velocity and plate DOFs with the full H1 norm. Dual side:
    full pressure with the L2 norm and the multiplier with the H^{-1/2}
    surrogate ``C (M + K)^{-1} C^T`` built on the whole plate P2 space.
    """
    b = problem.blocks
    Vf, F = problem.vfree, problem.wfree
    scale = 1.0 if dt is None else 1.0 / dt
    Bmat = sp.bmat([[-b["B"][:, Vf], None],
                    [b["C_u"][:, Vf], -scale * b["C_w"][:, F]]], format="csr")
    Hu = (b["M_u"] + b["K_u"])[Vf][:, Vf]
    Hw = (b["M_w"] + b["K_w"])
    Mx = sp.block_diag([Hu, Hw[F][:, F]], format="csc")
    Mq = assemble_mass(problem.Q)
    Cw = b["C_w"].toarray()
    Sg = Cw @ np.linalg.solve(Hw.toarray(), Cw.T)
    My = sp.block_diag([Mq, sp.csr_matrix(Sg)], format="csr")
    return Bmat, Mx, My


def run_infsup_sweep(levels=(2, 3, 4), dt=None, which="full"):
    """Inf-sup estimates ``[(h, beta_h), ...]``; ``which`` is ``"full"`` or ``"divergence"``."""
    out = []
    for n in levels:
        problem = C.CoupledProblem(n)
        if which == "full":
            B, Mx, My = infsup_blocks(problem, dt)
            beta = smallest_generalized_singular_value(B, Mx, My)
        elif which == "divergence":
            b = problem.blocks
            I = np.flatnonzero(~problem.V.fixed)
            I = np.setdiff1d(I, problem.gamma)       # no-slip everywhere: constants are in the kernel
            B = -b["B"][:, I]
            Mx = (b["M_u"] + b["K_u"])[I][:, I]
            My = assemble_mass(problem.Q)
            beta = smallest_generalized_singular_value(B, Mx, My, deflate=np.ones(problem.Q.dof_count))
        else:
            raise ValueError(f"unknown block {which!r}")
        out.append((1.0 / n, float(beta)))
    return out
