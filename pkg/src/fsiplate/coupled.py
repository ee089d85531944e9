"""Backward Euler time stepping of the coupled Stokes / plate system.

Unknowns per step: fluid velocity ``u`` (P2), zero-mean pressure ``p0`` (P1),
plate deflection ``w`` and ``z = -lap w`` (P2, zero on the plate edge), the
multiplier ``g`` (P1 on the plate) and the pressure mean ``s``.

Three solution paths share the same assembled blocks:

* ``partitioned``: fixed-point iteration between a Dirichlet fluid solve
  (``u_3 = dw/dt`` imposed strongly on the plate) and a plate solve loaded by
  the pressure trace.
* ``monolithic`` with ``form="strong"``: the limit system of that iteration,
  solved in one factorization.
* ``monolithic`` with ``form="multiplier"``: the kinematic condition enforced
  weakly through the multiplier, with the full pressure as unknown.
"""
from __future__ import annotations

import enum
import inspect
import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import assembly as asm
from .errors import CompatibilityError, InvalidArgumentError, NoConvergenceError
from .linalg import factorize, solve
from .mesh import build_box_fluid_mesh, extract_plate_mesh
from .params import PhysicalParams
from .spaces import Role, build_space, interpolate

DEFAULT_BOUNDS = ((0.0, 1.0), (0.0, 1.0), (-1.0, 0.0))


class Mode(enum.Enum):
    PARTITIONED = "partitioned"
    MONOLITHIC = "monolithic"


@dataclass(frozen=True)
class CouplingConfig:
    mode: Mode = Mode.PARTITIONED
    tol: float = 1e-8
    max_iter: int = 50
    theta: float = 1.0
    form: str = "strong"         # monolithic variant: "strong" or "multiplier"

    def __post_init__(self):
        object.__setattr__(self, "mode", Mode(self.mode))
        if not self.tol > 0:
            raise InvalidArgumentError("tol must be positive")
        if int(self.max_iter) != self.max_iter or self.max_iter < 1:
            raise InvalidArgumentError("max_iter must be a positive integer")
        if not 0 < self.theta <= 1:
            raise InvalidArgumentError("theta must lie in (0, 1]")
        if self.form not in ("strong", "multiplier"):
            raise InvalidArgumentError(f"unknown monolithic form {self.form!r}")


@dataclass(frozen=True)
class CoupledState:
    """Current level plus the history needed by the two-step plate stencil.

    ``w``/``z`` are the newest level; ``w_prev``/``z_prev`` the level before.
    ``wdot`` and ``zdot`` are ``(w - w_prev) / dt`` and ``(z - z_prev) / dt``,
    stored as computed from the increments so they carry no cancellation error.
    """

    n: int
    t: float
    dt: float
    u: np.ndarray
    p0: np.ndarray
    w: np.ndarray
    z: np.ndarray
    g: np.ndarray
    s: float
    u_prev: np.ndarray
    w_prev: np.ndarray
    w_prev2: np.ndarray
    z_prev: np.ndarray
    z_prev2: np.ndarray
    wdot: np.ndarray
    zdot: np.ndarray
    iterations: int = 0

    @property
    def pressure(self):
        """Full pressure ``p0 + s``."""
        return self.p0 + self.s


@dataclass(frozen=True)
class StepRecord:
    n: int
    t: float
    energy: float
    fluid_kinetic: float
    plate_kinetic: float
    rotational_kinetic: float
    elastic: float
    interface_mismatch: float
    wdot_integral: float
    max_displacement: float
    peak_wdot: float
    iterations: int


class CoupledProblem:
    """Meshes, spaces and unit-coefficient blocks of one discretization."""

    def __init__(self, n, params=None, nz=None, bounds=DEFAULT_BOUNDS,
                 fluid_forcing=None, plate_forcing=None, load_exactness=8):
        self.params = params or PhysicalParams()
        depth = bounds[2][1] - bounds[2][0]
        nz = max(1, int(round(n * depth))) if nz is None else nz
        self.n = n
        self.fluid_mesh = build_box_fluid_mesh(n, n, nz, bounds)
        self.plate_mesh, self.trace = extract_plate_mesh(self.fluid_mesh)
        self.V = build_space(self.fluid_mesh, 2, 3, Role.VELOCITY)
        self.Q = build_space(self.fluid_mesh, 1, 1, Role.PRESSURE)
        self.W = build_space(self.plate_mesh, 2, 1, Role.PLATE_W)
        self.Z = build_space(self.plate_mesh, 2, 1, Role.PLATE_Z)
        self.G = build_space(self.plate_mesh, 1, 1, Role.MULTIPLIER)
        self.fluid_forcing = fluid_forcing
        self.plate_forcing = plate_forcing
        self.load_exactness = load_exactness

        V, Q, W, G = self.V, self.Q, self.W, self.G
        b = asm.BlockSystem()
        b.add("M_u", asm.assemble_mass(V), (V.dof_count,) * 2)
        b.add("K_u", asm.assemble_stiffness(V), (V.dof_count,) * 2)
        b.add("B", asm.assemble_divergence(V, Q), (Q.dof_count, V.dof_count))
        b.add("C_u", asm.assemble_interface_velocity_coupling(V, G, self.trace), (G.dof_count, V.dof_count))
        b.add("M_w", asm.assemble_mass(W), (W.dof_count,) * 2)
        b.add("K_w", asm.assemble_stiffness(W), (W.dof_count,) * 2)
        b.add("C_w", asm.assemble_plate_multiplier_coupling(W, G), (G.dof_count, W.dof_count))
        r, m = asm.assemble_mean_columns(W, Q)
        b.rhs["r"], b.rhs["m"] = r, m
        b.validate()
        self.blocks = b

        # plate P2 node -> fluid scalar node; plate interior nodes carry the interface DOFs
        self.plate_to_fluid = asm.trace_node_map(V, W, self.trace)
        self.wfree = W.free
        self.gamma = 2 * V.n_scalar + self.plate_to_fluid[self.wfree]
        expect = np.sort(2 * V.n_scalar + V.node_sets["interface"])
        if not np.array_equal(np.sort(self.gamma), expect):
            raise InvalidArgumentError("interface DOFs of fluid and plate do not coincide")
        self.vfree = V.free
        self.interior = np.setdiff1d(self.vfree, self.gamma)
        self.pressure_trace = self.trace.vertex_map
        nG, nQ = G.dof_count, Q.dof_count
        self.T = sp.csr_matrix((np.ones(nG), (np.arange(nG), self.pressure_trace)), shape=(nG, nQ))
        self._cache = {}

    # loads ---------------------------------------------------------------
    def fluid_load(self, t):
        if self.fluid_forcing is None:
            return np.zeros(self.V.dof_count)
        return asm.assemble_load(self.V, self.fluid_forcing, t, self.load_exactness)

    def plate_load(self, t):
        if self.plate_forcing is None:
            return np.zeros(self.W.dof_count)
        return asm.assemble_load(self.W, self.plate_forcing, t, self.load_exactness)

    # cached operators ----------------------------------------------------
    def cached(self, key, build):
        val = self._cache.get(key)
        if val is None:
            val = build()
            self._cache[key] = val
        return val

    def fluid_operator(self, dt):
        p = self.params
        return self.cached(("A", dt), lambda: (p.rho_f * self.blocks["M_u"] + p.nu_f * dt * self.blocks["K_u"]).tocsr())

    def plate_mass_coeffs(self, dt):
        p = self.params
        return p.omega * p.rho_p / dt, p.omega * p.rho_rot / dt

    def plate_history(self, state, dt):
        aw, az = self.plate_mass_coeffs(dt)
        M = self.blocks["M_w"]
        # increment form: w - 2w^n + w^{n-1} = dw - dt * wdot^n, same for z;
        # the stiffness acting on z^n is moved to the right-hand side
        hist = dt * (M @ (aw * state.wdot + az * state.zdot))
        return hist - self.params.D * dt * (self.blocks["K_w"] @ state.z)

    def poisson_residual(self, state):
        return self.blocks["K_w"] @ state.w - self.blocks["M_w"] @ state.z

    def l2_plate(self, v):
        return math.sqrt(max(float(v @ (self.blocks["M_w"] @ v)), 0.0))


def build_problem(n, params=None, **kw):
    return CoupledProblem(n, params, **kw)


def _takes_time(f):
    try:
        params = inspect.signature(f).parameters.values()
    except (TypeError, ValueError):
        return True
    pos = [p for p in params if p.kind in (p.POSITIONAL_ONLY, p.POSITIONAL_OR_KEYWORD)]
    return len(pos) >= 2 or any(p.kind is p.VAR_POSITIONAL for p in params)


def _eval(f, space, t):
    """Coefficients from an array, ``None`` (zero) or a callable ``f(x)`` / ``f(x, t)``."""
    if f is None:
        return np.zeros(space.dof_count)
    if callable(f):
        return interpolate(space, f, t if _takes_time(f) else None)
    v = np.asarray(f, dtype=float)
    if v.shape != (space.dof_count,):
        raise InvalidArgumentError(f"initial data has shape {v.shape}, expected ({space.dof_count},)")
    return v.copy()


def discrete_poisson(problem, w):
    """z with (z, phi) = (grad w, grad phi) for all plate test functions, z = 0 on the edge."""
    F = problem.wfree
    fac = problem.cached("poisson", lambda: factorize(problem.blocks["M_w"][F][:, F]))
    z = np.zeros_like(w)
    z[F], _ = solve(fac, (problem.blocks["K_w"] @ w)[F])
    return z


def inverse_poisson(problem, z):
    """w with (grad w, grad phi) = (z, phi) for all plate test functions, w = 0 on the edge."""
    F = problem.wfree
    fac = problem.cached("inverse_poisson", lambda: factorize(problem.blocks["K_w"][F][:, F]))
    w = np.zeros_like(z)
    w[F], _ = solve(fac, (problem.blocks["M_w"] @ z)[F])
    return w


def _plate_level(problem, w0, z0, t):
    W = problem.W
    if z0 is not None:
        z = _eval(z0, W, t)
        z[W.fixed] = 0.0
        return inverse_poisson(problem, z), z
    w = _eval(w0, W, t)
    w[W.fixed] = 0.0
    return w, discrete_poisson(problem, w)


def initialize(problem, dt, u0=None, w0=None, w_t0=None, w_prev=None, z0=None, z_prev=None, t0=0.0):
    """Initial state from data given as arrays or callables ``f(x)`` / ``f(x, t)``.

    ``w_prev`` (evaluated at ``t0 - dt``) overrides the default ``w0 - dt * w_t0``.
    Plate levels satisfy the discrete identity (z, phi) = (grad w, grad phi):
    by default z is computed from w; when ``z0`` (and ``z_prev``) are given,
    z is interpolated and w recovered from it instead.
    """
    if not dt > 0:
        raise InvalidArgumentError("dt must be positive")
    V, W = problem.V, problem.W
    u = _eval(u0, V, t0)
    keep = np.zeros(V.dof_count, dtype=bool)
    keep[problem.vfree] = True
    u[~keep] = 0.0
    w, z = _plate_level(problem, w0, z0, t0)
    if w_prev is not None or z_prev is not None:
        wp, zp = _plate_level(problem, w_prev, z_prev, t0 - dt)
        wdot = (w - wp) / dt
    else:
        wdot = _eval(w_t0, W, t0)
        wdot[W.fixed] = 0.0
        wp = w - dt * wdot
        zp = discrete_poisson(problem, wp)
    return CoupledState(
        n=0, t=float(t0), dt=float(dt), u=u, p0=np.zeros(problem.Q.dof_count), w=w, z=z,
        g=np.zeros(problem.G.dof_count), s=0.0, u_prev=u.copy(), w_prev=wp, w_prev2=wp.copy(),
        z_prev=zp, z_prev2=zp.copy(), wdot=wdot, zdot=(z - zp) / dt,
    )


# -- fluid subproblem ---------------------------------------------------------

def _fluid_factor(problem, dt):
    def build():
        A = problem.fluid_operator(dt)
        B = problem.blocks["B"]
        I = problem.interior
        m = problem.blocks.rhs["m"][:, None]
        AII = A[I][:, I]
        BI = B[:, I]
        K = sp.bmat([[AII, -dt * BI.T, None],
                     [BI, None, sp.csr_matrix(m)],
                     [None, sp.csr_matrix(m.T), None]], format="csc")
        return factorize(K)
    return problem.cached(("fluid", dt), build)


def zero_mean_projection(problem, wdot):
    """Shift interior plate values so that int wdot = 0 (edge values stay zero)."""
    r = problem.blocks.rhs["r"]
    F = problem.wfree
    out = wdot.copy()
    out[F] -= (r @ wdot) / r[F].sum()
    return out


def fluid_step(problem, state, wdot, dt, t_new, f=None, check=True):
    """Stokes solve with ``u_3 = wdot`` on the plate; returns ``(u, p0)``."""
    wdot = np.asarray(wdot, dtype=float)
    if check:
        r = problem.blocks.rhs["r"]
        mean = abs(float(r @ wdot))
        scale = problem.l2_plate(wdot) * math.sqrt(problem.plate_mesh.measure)
        if mean > 1e-10 * max(scale, 1e-300) and mean > 1e-14:
            raise CompatibilityError(f"interface data has nonzero flux {mean:.3e}")
    p = problem.params
    I, Gm = problem.interior, problem.gamma
    A = problem.fluid_operator(dt)
    B = problem.blocks["B"]
    uG = wdot[problem.wfree]
    F = problem.fluid_load(t_new) if f is None else f
    rhs_u = dt * F[I] + p.rho_f * (problem.blocks["M_u"] @ state.u)[I] - A[I][:, Gm] @ uG
    rhs_q = -(B[:, Gm] @ uG)
    rhs = np.concatenate([rhs_u, rhs_q, [0.0]])
    x, _ = solve(_fluid_factor(problem, dt), rhs)
    u = np.zeros(problem.V.dof_count)
    u[I] = x[:I.size]
    u[Gm] = uG
    p0 = x[I.size:I.size + problem.Q.dof_count]
    return u, p0


def extract_pressure_trace(p0, trace):
    """Nodal restriction of the fluid P1 pressure to the plate vertices."""
    return np.asarray(p0)[trace.vertex_map].copy()


# -- plate subproblem ---------------------------------------------------------

def _plate_blocks(problem, dt):
    F = problem.wfree
    M = problem.blocks["M_w"][F][:, F]
    K = problem.blocks["K_w"][F][:, F]
    r = problem.blocks.rhs["r"][F][:, None]
    aw, az = problem.plate_mass_coeffs(dt)
    D = problem.params.D
    return M, K, r, aw, az, D


def _plate_factor(problem, dt):
    def build():
        M, K, r, aw, az, D = _plate_blocks(problem, dt)
        S = sp.bmat([[aw * M, az * M + D * dt * K, -dt * sp.csr_matrix(r)],
                     [-K, M, None],
                     [sp.csr_matrix(r.T), None, None]], format="csc")
        return factorize(S)
    return problem.cached(("plate", dt), build)


def _plate_increment(problem, state, g, dt, Fp):
    # unknowns (w - w^n, z - z^n, s) on the free plate nodes
    F = problem.wfree
    nF = F.size
    rhs_eta = dt * Fp + dt * (problem.blocks["C_w"].T @ g) + problem.plate_history(state, dt)
    rhs = np.concatenate([rhs_eta[F], problem.poisson_residual(state)[F], [0.0]])
    x, _ = solve(_plate_factor(problem, dt), rhs)
    dw = np.zeros(problem.W.dof_count)
    dz = np.zeros(problem.W.dof_count)
    dw[F] = x[:nF]
    dz[F] = x[nF:2 * nF]
    return dw, dz, float(x[-1])


def plate_step(problem, state, g, dt, t_new, fp=None):
    """Plate solve loaded by ``g`` with the zero-flux constraint; returns ``(w, z, s)``."""
    Fp = problem.plate_load(t_new) if fp is None else fp
    dw, dz, s = _plate_increment(problem, state, g, dt, Fp)
    return state.w + dw, state.z + dz, s


def _commit(state, dt, t_new, u, p0, dw, dz, g, s, iterations):
    return CoupledState(
        n=state.n + 1, t=t_new, dt=dt, u=u, p0=p0, w=state.w + dw, z=state.z + dz, g=g, s=s,
        u_prev=state.u, w_prev=state.w, w_prev2=state.w_prev, z_prev=state.z, z_prev2=state.z_prev,
        wdot=dw / dt, zdot=dz / dt, iterations=iterations,
    )


def fixed_point_step(problem, state, dt, t_new, config=None):
    """One partitioned step; returns ``(new_state, iterations)``."""
    config = config or CouplingConfig()
    F = problem.fluid_load(t_new)
    Fp = problem.plate_load(t_new)
    wd = state.wdot
    theta = config.theta
    change = np.inf
    for k in range(1, config.max_iter + 1):
        u, p0 = fluid_step(problem, state, zero_mean_projection(problem, wd), dt, t_new, f=F)
        g = extract_pressure_trace(p0, problem.trace)
        dw, dz, s = _plate_increment(problem, state, g, dt, Fp)
        wd_new = theta * dw / dt + (1.0 - theta) * wd
        change = problem.l2_plate(wd_new - wd) / max(problem.l2_plate(wd_new), 1e-14)
        wd = wd_new
        if change <= config.tol:
            break
    else:
        raise NoConvergenceError(f"fixed point not converged after {config.max_iter} iterations",
                                 residual=change, iterations=config.max_iter)
    # final fluid solve so the committed interface velocity equals the committed dw/dt
    u, p0 = fluid_step(problem, state, dw / dt, dt, t_new, f=F, check=False)
    g = extract_pressure_trace(p0, problem.trace)
    return _commit(state, dt, t_new, u, p0, dw, dz, g, s, k), k


# -- monolithic ---------------------------------------------------------------

def _strong_factor(problem, dt):
    def build():
        A = problem.fluid_operator(dt)
        B = problem.blocks["B"]
        I, Gm = problem.interior, problem.gamma
        m = sp.csr_matrix(problem.blocks.rhs["m"][:, None])
        M, K, r, aw, az, D = _plate_blocks(problem, dt)
        r = sp.csr_matrix(r)
        CwT_T = (problem.blocks["C_w"][:, problem.wfree].T @ problem.T).tocsr()
        S = sp.bmat([
            [A[I][:, I], -dt * B[:, I].T, None, A[I][:, Gm] / dt, None, None],
            [B[:, I], None, m, B[:, Gm] / dt, None, None],
            [None, m.T, None, None, None, None],
            [None, -dt * CwT_T, None, aw * M, az * M + D * dt * K, -dt * r],
            [None, None, None, -K, M, None],
            [None, None, None, r.T, None, None],
        ], format="csc")
        return factorize(S)
    return problem.cached(("strong", dt), build)


def _multiplier_factor(problem, dt):
    def build():
        A = problem.fluid_operator(dt)
        B = problem.blocks["B"]
        Vf, F = problem.vfree, problem.wfree
        Cu = problem.blocks["C_u"][:, Vf]
        Cw = problem.blocks["C_w"][:, F]
        M, K, _, aw, az, D = _plate_blocks(problem, dt)
        S = sp.bmat([
            [A[Vf][:, Vf], -dt * B[:, Vf].T, None, None, dt * Cu.T],
            [B[:, Vf], None, None, None, None],
            [None, None, aw * M, az * M + D * dt * K, -dt * Cw.T],
            [None, None, -K, M, None],
            [Cu, None, -Cw / dt, None, None],
        ], format="csc")
        return factorize(S)
    return problem.cached(("multiplier", dt), build)


def monolithic_step(problem, state, dt, t_new, form="strong"):
    """One coupled solve of all unknowns in a single factorization."""
    p = problem.params
    Fl = problem.fluid_load(t_new)
    Fp = problem.plate_load(t_new)
    F = problem.wfree
    nF = F.size
    nQ = problem.Q.dof_count
    Mu_un = problem.blocks["M_u"] @ state.u
    eta = (dt * Fp + problem.plate_history(state, dt))[F]
    phi = problem.poisson_residual(state)[F]
    dw = np.zeros(problem.W.dof_count)
    dz = np.zeros(problem.W.dof_count)
    u = np.zeros(problem.V.dof_count)
    if form == "strong":
        A = problem.fluid_operator(dt)
        B = problem.blocks["B"]
        I, Gm = problem.interior, problem.gamma
        rhs = np.concatenate([
            dt * Fl[I] + p.rho_f * Mu_un[I], np.zeros(nQ + 1), eta, phi, [0.0],
        ])
        x, _ = solve(_strong_factor(problem, dt), rhs)
        o = 0
        u[I] = x[o:o + I.size]; o += I.size
        p0 = x[o:o + nQ]; o += nQ + 1
        dw[F] = x[o:o + nF]; o += nF
        dz[F] = x[o:o + nF]; o += nF
        s = float(x[o])
        u[Gm] = dw[F] / dt
        g = extract_pressure_trace(p0, problem.trace)
    elif form == "multiplier":
        Vf = problem.vfree
        rhs = np.concatenate([
            dt * Fl[Vf] + p.rho_f * Mu_un[Vf], np.zeros(nQ), eta, phi, np.zeros(problem.G.dof_count),
        ])
        x, _ = solve(_multiplier_factor(problem, dt), rhs)
        o = 0
        u[Vf] = x[o:o + Vf.size]; o += Vf.size
        pfull = x[o:o + nQ]; o += nQ
        dw[F] = x[o:o + nF]; o += nF
        dz[F] = x[o:o + nF]; o += nF
        g = x[o:].copy()
        m = problem.blocks.rhs["m"]
        s = float(m @ pfull) / float(m.sum())
        p0 = pfull - s
    else:
        raise InvalidArgumentError(f"unknown monolithic form {form!r}")
    return _commit(state, dt, t_new, u, p0, dw, dz, g, s, 1)


def step(problem, state, dt, config=None):
    config = config or CouplingConfig()
    t_new = state.t + dt
    if config.mode is Mode.PARTITIONED:
        return fixed_point_step(problem, state, dt, t_new, config)[0]
    return monolithic_step(problem, state, dt, t_new, config.form)


# -- diagnostics --------------------------------------------------------------

def diagnostics(problem, state):
    p = problem.params
    b = problem.blocks
    wd = state.wdot
    u3 = state.u[2 * problem.V.n_scalar + problem.plate_to_fluid]
    fk = 0.5 * p.rho_f * float(state.u @ (b["M_u"] @ state.u))
    pk = 0.5 * p.omega * p.rho_p * float(wd @ (b["M_w"] @ wd))
    rk = 0.5 * p.omega * p.rho_rot * float(wd @ (b["K_w"] @ wd))
    el = 0.5 * p.D * float(state.z @ (b["M_w"] @ state.z))
    return StepRecord(
        n=state.n, t=state.t, energy=fk + pk + rk + el, fluid_kinetic=fk, plate_kinetic=pk,
        rotational_kinetic=rk, elastic=el, interface_mismatch=problem.l2_plate(u3 - wd),
        wdot_integral=float(b.rhs["r"] @ wd), max_displacement=float(np.max(np.abs(state.w))),
        peak_wdot=float(np.max(np.abs(wd))), iterations=state.iterations,
    )


def advance(problem, state, dt, t_final, config=None, observers=()):
    """Step until ``t_final``; returns ``(state, records)`` with one record per level incl. the start."""
    config = config or CouplingConfig()
    nsteps = (t_final - state.t) / dt
    N = int(round(nsteps))
    if N < 0 or abs(nsteps - N) > 1e-8 * max(1.0, abs(nsteps)):
        raise InvalidArgumentError(f"t_final - t = {t_final - state.t} is not a multiple of dt = {dt}")
    records = [diagnostics(problem, state)]
    for obs in observers:
        obs(records[0])
    t0 = state.t
    for k in range(1, N + 1):
        if config.mode is Mode.PARTITIONED:
            state, _ = fixed_point_step(problem, state, dt, t0 + k * dt, config)
        else:
            state = monolithic_step(problem, state, dt, t0 + k * dt, config.form)
        rec = diagnostics(problem, state)
        records.append(rec)
        for obs in observers:
            obs(rec)
    return state, records
