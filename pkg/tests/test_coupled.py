import math
from dataclasses import replace

import numpy as np
import pytest

from fsiplate import coupled as C
from fsiplate.errors import CompatibilityError, InvalidArgumentError, NoConvergenceError
from fsiplate.experiments import mms_problem
from fsiplate.mms import ExactSolution, error_norm
from fsiplate.params import VIBRATION_PARAMS, PhysicalParams
from fsiplate.spaces import interpolate

EX = ExactSolution()


@pytest.fixture(scope="module")
def mms4():
    return mms_problem(4, PhysicalParams())[0]


@pytest.fixture(scope="module")
def mms8():
    return mms_problem(8, PhysicalParams())[0]


def _mms_state(problem, dt, t0=0.0):
    return C.initialize(problem, dt, u0=EX.u, w0=EX.w, w_prev=EX.w, z0=EX.z, z_prev=EX.z, t0=t0)


def _vibration_w0(x):
    return 1e-2 * np.sin(2 * np.pi * x[:, 0]) * np.sin(2 * np.pi * x[:, 1])


def _rel(a, b):
    return np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-300)


# -- configuration ---------------------------------------------------------------

def test_coupling_config_validation():
    assert C.CouplingConfig(mode="monolithic").mode is C.Mode.MONOLITHIC
    for bad in ({"tol": 0.0}, {"max_iter": 0}, {"theta": 0.0}, {"theta": 1.5}, {"form": "weak"}):
        with pytest.raises(InvalidArgumentError):
            C.CouplingConfig(**bad)
    with pytest.raises(ValueError):
        C.CouplingConfig(mode="sequential")


def test_params_validation():
    with pytest.raises(InvalidArgumentError):
        PhysicalParams(nu_f=-1.0)
    with pytest.raises(InvalidArgumentError):
        PhysicalParams(rho_p=0.0)
    assert PhysicalParams(rho_rot=0.0).rho_rot == 0.0
    assert PhysicalParams().replace(omega=1e5).omega == 1e5


# -- initialize ------------------------------------------------------------------

def test_rest_start(problem2):
    s = C.initialize(problem2, 0.1)
    for name in ("u", "p0", "w", "z", "g", "w_prev", "z_prev", "wdot", "zdot"):
        assert not getattr(s, name).any()
    assert s.n == 0 and s.s == 0.0


def test_vibration_initial_z():
    # -lap w0 = 8 pi^2 w0; the discrete z converges to it pointwise at second order
    target = 8 * math.pi ** 2 * 1e-2
    errs = []
    for n in (8, 16, 32):
        p = C.CoupledProblem(n, VIBRATION_PARAMS, nz=1)
        s = C.initialize(p, 1e-3, w0=_vibration_w0)
        k = np.flatnonzero(np.all(np.isclose(p.W.node_coords, [0.25, 0.25]), axis=1))[0]
        assert s.w[k] == pytest.approx(1e-2)
        errs.append(abs(s.z[k] - target) / target)
        # rest start in velocity: the two history levels coincide
        assert np.array_equal(s.w_prev, s.w) and not s.wdot.any()
        # discrete Poisson identity (z, phi) = (grad w, grad phi) on free nodes
        assert np.abs(p.poisson_residual(s)[p.wfree]).max() <= 1e-12
    assert errs[-1] <= 0.03
    assert math.log2(errs[1] / errs[2]) >= 1.5


def test_initial_velocity_history():
    p = C.CoupledProblem(2)
    s = C.initialize(p, 0.5, w0=_vibration_w0, w_t0=lambda x: x[:, 0] * (1 - x[:, 0]) * x[:, 1] * (1 - x[:, 1]))
    assert np.allclose(s.w - s.w_prev, 0.5 * s.wdot, atol=1e-16)
    assert np.abs(p.poisson_residual(replace(s, w=s.w_prev, z=s.z_prev))[p.wfree]).max() <= 1e-12


@pytest.mark.parametrize("seed,levels,rate", [("z", (8, 16), 2.7), ("w", (16, 32), 1.5)])
def test_initial_z_accuracy(seed, levels, rate):
    errs = []
    for n in levels:
        p = C.CoupledProblem(n, nz=1)
        kw = {"z0": EX.z} if seed == "z" else {}
        s = C.initialize(p, 1e-4, w0=EX.w, **kw)
        errs.append(error_norm(p.W, s.z, EX.field("z"), 0.0))
    # interpolated z keeps the P2 order; z from a Poisson solve of interpolated w loses about one order
    assert math.log2(errs[0] / errs[1]) >= rate


def test_initialize_bad_shapes(problem2):
    with pytest.raises(InvalidArgumentError):
        C.initialize(problem2, 0.1, u0=np.zeros(3))
    with pytest.raises(InvalidArgumentError):
        C.initialize(problem2, 0.0)


# -- fluid step --------------------------------------------------------------------

def test_fluid_step_zero(problem2):
    s = C.initialize(problem2, 0.1)
    u, p0 = C.fluid_step(problem2, s, np.zeros(problem2.W.dof_count), 0.1, 0.1)
    assert not u.any() and not p0.any()


def test_fluid_step_incompatible(problem2):
    s = C.initialize(problem2, 0.1)
    wd = np.zeros(problem2.W.dof_count)
    wd[problem2.wfree] = 1.0
    with pytest.raises(CompatibilityError):
        C.fluid_step(problem2, s, wd, 0.1, 0.1)
    u, _ = C.fluid_step(problem2, s, C.zero_mean_projection(problem2, wd), 0.1, 0.1)
    assert np.abs(problem2.blocks["B"] @ u).max() <= 1e-9


def test_fluid_step_mms(mms8):
    dt = 1e-4
    s = _mms_state(mms8, dt)
    wd = interpolate(mms8.W, lambda x: EX.w_t(x, dt))
    wd[mms8.W.fixed] = 0.0
    u, p0 = C.fluid_step(mms8, s, C.zero_mean_projection(mms8, wd), dt, dt)
    assert np.abs(mms8.blocks["B"] @ u).max() <= 1e-9
    err = error_norm(mms8.V, u, EX.field("u"), dt, "H1")
    assert 2e-5 / 5 <= err <= 2e-5 * 5
    assert abs(mms8.blocks.rhs["m"] @ p0) <= 1e-10 * max(np.linalg.norm(p0), 1e-300)


# -- pressure trace ------------------------------------------------------------------

def test_pressure_trace(problem4):
    p = problem4
    assert not C.extract_pressure_trace(np.zeros(p.Q.dof_count), p.trace).any()
    q = interpolate(p.Q, lambda x: x[:, 2] + 0.5)
    assert np.allclose(C.extract_pressure_trace(q, p.trace), 0.5, atol=1e-15)
    f = lambda x: np.sin(2 * np.pi * x[:, 0]) * np.sin(2 * np.pi * x[:, 1]) * np.exp(x[:, 2])
    g = C.extract_pressure_trace(interpolate(p.Q, f), p.trace)
    xy = p.G.node_coords
    assert np.abs(g - f(np.column_stack([xy, np.zeros(len(xy))]))).max() <= 1e-13


# -- plate step ----------------------------------------------------------------------

def test_plate_step_zero(problem2):
    s = C.initialize(problem2, 0.1)
    w, z, sm = C.plate_step(problem2, s, np.zeros(problem2.G.dof_count), 0.1, 0.1)
    assert not w.any() and not z.any() and sm == 0.0


def test_plate_step_constant_load(problem4):
    p = problem4
    s = C.initialize(p, 0.1)
    w, z, sm = C.plate_step(p, s, np.full(p.G.dof_count, 3.0), 0.1, 0.1)
    wdot = (w - s.w) / 0.1
    assert abs(p.blocks.rhs["r"] @ wdot) <= 1e-12
    assert sm != 0.0


def test_plate_step_mms():
    errs = []
    for n in (4, 8):
        p, _ = mms_problem(n, PhysicalParams())
        dt = 1e-4
        s = _mms_state(p, dt)
        g = np.zeros(p.G.dof_count)
        w, z, _ = C.plate_step(p, s, g, dt, dt)
        errs.append(error_norm(p.W, w, EX.field("w"), dt, "H1"))
    assert math.log2(errs[0] / errs[1]) >= 1.5
    assert errs[1] < 1e-4


# -- fixed point vs monolithic ---------------------------------------------------------

def test_fixed_point_rest(problem2):
    s = C.initialize(problem2, 0.1)
    new, k = C.fixed_point_step(problem2, s, 0.1, 0.1)
    assert k == 1
    assert not new.u.any() and not new.w.any() and new.n == 1


def test_fixed_point_matches_monolithic(mms4):
    dt = 1e-4
    s = _mms_state(mms4, dt)
    a, _ = C.fixed_point_step(mms4, s, dt, dt, C.CouplingConfig(tol=1e-12))
    b = C.monolithic_step(mms4, s, dt, dt)
    for name in ("u", "p0", "w", "z", "g"):
        assert _rel(getattr(a, name), getattr(b, name)) <= 1e-7, name


def test_vibration_first_step_converges():
    p = C.CoupledProblem(4, VIBRATION_PARAMS, bounds=((0, 1), (0, 1), (-0.5, 0)))
    s = C.initialize(p, 1e-3, w0=_vibration_w0)
    new, k = C.fixed_point_step(p, s, 1e-3, 1e-3)
    assert 1 <= k <= 50
    assert new.iterations == k


def test_fixed_point_cap(mms4):
    s = _mms_state(mms4, 1e-2)
    with pytest.raises(NoConvergenceError) as info:
        C.fixed_point_step(mms4, s, 1e-2, 1e-2, C.CouplingConfig(tol=1e-14, max_iter=1))
    assert info.value.iterations == 1 and info.value.residual > 0


def test_relaxed_fixed_point(mms4):
    dt = 1e-3
    s = _mms_state(mms4, dt)
    a, k1 = C.fixed_point_step(mms4, s, dt, dt, C.CouplingConfig(tol=1e-11))
    b, k2 = C.fixed_point_step(mms4, s, dt, dt, C.CouplingConfig(tol=1e-11, theta=0.5))
    assert _rel(a.w, b.w) <= 1e-8
    assert k2 >= k1


@pytest.mark.parametrize("form", ["strong", "multiplier"])
def test_monolithic_zero(problem2, form):
    s = C.initialize(problem2, 0.1)
    new = C.monolithic_step(problem2, s, 0.1, 0.1, form)
    for name in ("u", "p0", "w", "z", "g"):
        assert not np.abs(getattr(new, name)).max() > 0
    assert new.s == 0.0


def test_multiplier_interface_residual(mms4):
    dt = 1e-3
    s = _mms_state(mms4, dt)
    new = C.monolithic_step(mms4, s, dt, dt, "multiplier")
    b = mms4.blocks
    res = b["C_u"] @ new.u - b["C_w"] @ new.wdot
    assert np.abs(res).max() <= 1e-10
    assert abs(b.rhs["m"] @ new.p0) <= 1e-10 * np.linalg.norm(new.p0)


def test_monolithic_unknown_form(problem2):
    with pytest.raises(InvalidArgumentError):
        C.monolithic_step(problem2, C.initialize(problem2, 0.1), 0.1, 0.1, "weak")


# -- advance and invariants ---------------------------------------------------------------

def test_advance_step_count_and_observers(mms4):
    seen = []
    s = _mms_state(mms4, 1e-4)
    final, recs = C.advance(mms4, s, 1e-4, 3e-4, observers=[seen.append])
    assert final.n == 3 and len(recs) == 4 and len(seen) == 4
    assert final.t == pytest.approx(3e-4)
    with pytest.raises(InvalidArgumentError):
        C.advance(mms4, s, 1e-4, 2.5e-4)


@pytest.mark.parametrize("mode", ["partitioned", "monolithic"])
def test_step_invariants(mms4, mode):
    dt = 1e-3
    s = _mms_state(mms4, dt)
    cfg = C.CouplingConfig(mode=mode)
    for _ in range(3):
        s = C.step(mms4, s, dt, cfg)
        r = mms4.blocks.rhs["r"]
        assert abs(r @ s.wdot) <= 1e-10
        assert abs(r @ ((s.w - s.w_prev) / dt)) <= 1e-10 * max(mms4.l2_plate(s.wdot), 1e-300) + 1e-15
        assert abs(mms4.blocks.rhs["m"] @ s.p0) <= 1e-10 * np.linalg.norm(s.p0)
        # strong imposition: interface velocity DOFs equal the committed dw/dt bitwise
        assert np.array_equal(s.u[mms4.gamma], s.wdot[mms4.wfree])
        assert np.array_equal(s.u_prev.shape, s.u.shape)


def test_energy_decay_short():
    p = C.CoupledProblem(4, VIBRATION_PARAMS, bounds=((0, 1), (0, 1), (-0.5, 0)))
    s = C.initialize(p, 1e-3, w0=_vibration_w0)
    _, recs = C.advance(p, s, 1e-3, 5e-3)
    E = np.array([r.energy for r in recs])
    assert np.all(np.diff(E) <= 1e-12 * E[0])


def test_linearity():
    p = C.CoupledProblem(2, VIBRATION_PARAMS)
    dt = 1e-2
    a = C.initialize(p, dt, w0=_vibration_w0)
    b = C.initialize(p, dt, w0=lambda x: 3.0 * _vibration_w0(x))
    for _ in range(2):
        a = C.step(p, a, dt, C.CouplingConfig(mode="monolithic"))
        b = C.step(p, b, dt, C.CouplingConfig(mode="monolithic"))
    for name in ("u", "p0", "w", "z"):
        assert _rel(getattr(b, name), 3.0 * getattr(a, name)) <= 1e-12


def test_diagnostics_fields(problem2):
    s = C.initialize(problem2, 0.1, w0=_vibration_w0)
    d = C.diagnostics(problem2, s)
    assert d.energy == pytest.approx(d.fluid_kinetic + d.plate_kinetic + d.rotational_kinetic + d.elastic)
    assert d.max_displacement == pytest.approx(np.abs(s.w).max())
    assert s.pressure.shape == s.p0.shape
