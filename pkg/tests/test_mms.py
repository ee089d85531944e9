import math
from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fsiplate.assembly import assemble_load
from fsiplate.errors import UndefinedRateError
from fsiplate.mesh import build_box_fluid_mesh, extract_plate_mesh
from fsiplate.mms import ZETA, ExactSolution, error_norm, fluid_forcing, observed_rate, plate_forcing
from fsiplate.params import PhysicalParams
from fsiplate.spaces import Role, build_space, interpolate

EX = ExactSolution()
H = 5e-4


def _d1(f, x, h=H):
    return (-f(x + 2 * h) + 8 * f(x + h) - 8 * f(x - h) + f(x - 2 * h)) / (12 * h)


def _d2(f, x, h=H):
    return (-f(x + 2 * h) + 16 * f(x + h) - 30 * f(x) + 16 * f(x - h) - f(x - 2 * h)) / (12 * h * h)


def _fd_laplacian(f, x, t):
    out = 0.0
    for d in range(x.shape[1]):
        e = np.zeros(x.shape[1])
        e[d] = 1.0
        out = out + _d2(lambda s: f(x + s * e, t), 0.0)
    return out


def _fd_gradient(f, x, t):
    cols = []
    for d in range(x.shape[1]):
        e = np.zeros(x.shape[1])
        e[d] = 1.0
        cols.append(_d1(lambda s: f(x + s * e, t), 0.0))
    return np.stack(cols, axis=-1)


def _rel(a, b):
    return np.linalg.norm(a - b) / np.linalg.norm(b)


def _fluid_points(rng, n):
    return rng.uniform([0, 0, -1], [1, 1, 0], size=(n, 3))


# -- invariants ----------------------------------------------------------------

def test_divergence_free(rng):
    x = _fluid_points(rng, 200)
    for t in (0.0, 0.37, 1.0):
        assert np.abs(EX.div_u(x, t)).max() <= 1e-12
        assert np.abs(np.trace(EX.grad_u(x, t), axis1=1, axis2=2)).max() <= 1e-12


def test_interface_condition(rng):
    xy = rng.uniform(0, 1, size=(100, 2))
    x = np.column_stack([xy, np.zeros(100)])
    for t in (0.0, 0.5):
        assert np.abs(EX.u(x, t)[:, 2] - EX.w_t(xy, t)).max() <= 1e-12
        assert np.abs(EX.u(x, t)[:, :2]).max() <= 1e-12


def test_z_is_minus_laplacian_w(rng):
    xy = rng.uniform(0, 1, size=(100, 2))
    assert np.abs(EX.z(xy, 0.2) + EX.lap_w(xy, 0.2)).max() <= 1e-10


@settings(max_examples=30, deadline=None)
@given(st.floats(0, 1), st.floats(0, 1), st.sampled_from(["x0", "x1", "y0", "y1", "bottom"]), st.floats(0, 2))
def test_no_slip_on_S(a, b, face, t):
    pt = {"x0": [0, a, -b], "x1": [1, a, -b], "y0": [a, 0, -b], "y1": [a, 1, -b], "bottom": [a, b, -1]}[face]
    assert np.abs(EX.u(np.array([pt], dtype=float), t)).max() <= 1e-12


def test_plate_edge_values(rng):
    s = rng.uniform(0, 1, 20)
    for pts in (np.column_stack([s, 0 * s]), np.column_stack([0 * s + 1, s])):
        assert np.abs(EX.w(pts, 0.1)).max() <= 1e-14
        assert np.abs(EX.z(pts, 0.1)).max() <= 1e-12


def test_pressure_is_zero(rng):
    x = _fluid_points(rng, 10)
    assert not EX.p(x, 0.3).any() and not EX.grad_p(x, 0.3).any()


# -- derivatives against finite differences ----------------------------------------

def test_time_derivatives(rng):
    x = _fluid_points(rng, 30)
    xy = x[:, :2]
    t = 0.4
    assert _rel(EX.u_t(x, t), _d1(lambda s: EX.u(x, s), t)) <= 1e-7
    assert _rel(EX.w_t(xy, t), _d1(lambda s: EX.w(xy, s), t)) <= 1e-7
    assert _rel(EX.w_tt(xy, t), _d2(lambda s: EX.w(xy, s), t)) <= 1e-7
    assert _rel(EX.z_tt(xy, t), _d2(lambda s: EX.z(xy, s), t)) <= 1e-7


def test_space_derivatives(rng):
    x = _fluid_points(rng, 30) * 0.98 + np.array([0.01, 0.01, -0.01]) * 0 + 0.005
    xy = x[:, :2]
    t = 0.1
    assert _rel(EX.grad_u(x, t), _fd_gradient(EX.u, x, t).transpose(0, 1, 2)) <= 1e-7
    assert _rel(EX.lap_u(x, t), _fd_laplacian(EX.u, x, t)) <= 1e-7
    assert _rel(EX.grad_w(xy, t), _fd_gradient(EX.w, xy, t)) <= 1e-7
    assert _rel(EX.lap_w(xy, t), _fd_laplacian(EX.w, xy, t)) <= 1e-7
    assert _rel(EX.grad_z(xy, t), _fd_gradient(EX.z, xy, t)) <= 1e-7
    assert _rel(EX.lap_z(xy, t), _fd_laplacian(EX.z, xy, t)) <= 1e-7


def test_fluid_forcing_identity(rng):
    x = _fluid_points(rng, 50)
    f = fluid_forcing(x, 0.3)
    assert np.allclose(f, -EX.u(x, 0.3) - EX.lap_u(x, 0.3), rtol=0, atol=1e-14)


def test_fluid_forcing_fd_oracle():
    x = np.array([[0.25, 0.25, -0.5]])
    params = PhysicalParams(rho_f=1.3, nu_f=0.7)
    strong = params.rho_f * _d1(lambda s: EX.u(x, s), 0.0) - params.nu_f * _fd_laplacian(EX.u, x, 0.0)
    assert _rel(fluid_forcing(x, 0.0, params), strong) <= 1e-7


def test_fluid_forcing_inviscid_isolation(rng):
    x = _fluid_points(rng, 10)
    oracle = SimpleNamespace(rho_f=2.0, nu_f=0.0)
    assert np.array_equal(fluid_forcing(x, 0.2, oracle), 2.0 * EX.u_t(x, 0.2))


def test_plate_forcing_closed_form():
    xy = np.array([[0.25, 0.25]])
    fp = plate_forcing(xy, 0.0)
    assert fp == pytest.approx(EX.w(xy, 0) + EX.z(xy, 0) - EX.lap_z(xy, 0), rel=1e-14)
    params = PhysicalParams()
    fd = _d2(lambda s: EX.w(xy, s), 0.0) + _d2(lambda s: EX.z(xy, s), 0.0) - _fd_laplacian(EX.z, xy, 0.0)
    assert _rel(fp, fd) <= 1e-7
    assert plate_forcing(xy, 0.0, params, omega=0.0) == pytest.approx(-EX.lap_z(xy, 0.0), rel=1e-15)


def test_plate_forcing_zero_mean(plate4):
    W = build_space(plate4[0], 2)
    assert abs(assemble_load(W, lambda x: plate_forcing(x, 0.0)).sum()) <= 1e-12


def test_zeta_value():
    assert ZETA == pytest.approx(1 / (60 * math.pi ** 4))
    assert ExactSolution(2.0).w(np.array([[0.3, 0.4]]), 0) == pytest.approx(2.0 / ZETA * EX.w(np.array([[0.3, 0.4]]), 0))


# -- error norms -------------------------------------------------------------------

def test_error_norm_trivial(plate4):
    W = build_space(plate4[0], 2)
    assert error_norm(W, np.zeros(W.dof_count), lambda x: np.zeros(len(x))) == 0.0
    one = np.ones(W.dof_count)
    assert error_norm(W, one, lambda x: np.ones(len(x))) <= 1e-13
    const = type("C", (), {"value": staticmethod(lambda x: np.ones(len(x))),
                           "gradient": staticmethod(lambda x: np.zeros((len(x), 2)))})
    assert error_norm(W, one, const, norm="H1") <= 1e-13


def test_interpolation_error_rates():
    errs = {"L2": [], "H1": []}
    for n in (8, 16):
        m = build_box_fluid_mesh(n, n, 1)
        plate, _ = extract_plate_mesh(m)
        W = build_space(plate, 2)
        c = interpolate(W, lambda x: EX.w(x, 0.0))
        for k in errs:
            errs[k].append(error_norm(W, c, EX.field("w"), 0.0, k))
    assert math.log2(errs["L2"][0] / errs["L2"][1]) >= 2.7
    assert math.log2(errs["H1"][0] / errs["H1"][1]) >= 1.8


def test_vector_h1_norm_of_velocity(box2):
    V = build_space(box2, 2, 3, Role.VELOCITY)
    e = error_norm(V, np.zeros(V.dof_count), EX.field("u"), 0.0, "H1")
    l2 = error_norm(V, np.zeros(V.dof_count), EX.field("u"), 0.0, "L2")
    assert e > l2 > 0


def test_error_norm_bad_norm(plate4):
    W = build_space(plate4[0], 1)
    with pytest.raises(ValueError):
        error_norm(W, np.zeros(W.dof_count), lambda x: 0 * x[:, 0], norm="Linf")
    with pytest.raises(ValueError):
        error_norm(W, np.zeros(W.dof_count), lambda x: 0 * x[:, 0], norm="H1")


# -- observed rates ------------------------------------------------------------------

def test_observed_rate_examples():
    assert observed_rate([4, 1], [2, 1]) == [pytest.approx(2.0)]
    assert observed_rate([1.07e-5, 2.22e-6], [1 / 2, 1 / 4])[0] == pytest.approx(2.27, abs=5e-3)
    assert observed_rate([3.13e-4, 7.77e-5], [1 / 2, 1 / 4])[0] == pytest.approx(2.01, abs=5e-3)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(1e-12, 1e3), min_size=3, max_size=3), st.floats(1e-6, 1e6))
def test_observed_rate_scale_invariant(errs, c):
    steps = [0.5, 0.25, 0.125]
    a = observed_rate(errs, steps)
    b = observed_rate([c * e for e in errs], steps)
    assert np.allclose(a, b, rtol=0, atol=1e-12)


@pytest.mark.parametrize("errs,steps", [([1.0], [1.0]), ([1.0, 0.0], [2, 1]), ([1.0, -1.0], [2, 1]),
                                        ([1.0, 2.0], [1, 2]), ([1.0, 2.0], [1, 1])])
def test_observed_rate_undefined(errs, steps):
    with pytest.raises(UndefinedRateError):
        observed_rate(errs, steps)
