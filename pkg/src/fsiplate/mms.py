"""Manufactured solution, its forcing terms and discrete error norms.

The fluid velocity is divergence free, vanishes on the walls and bottom and
matches the plate velocity on the top. The pressure is identically zero, so
the exact multiplier and pressure mean are zero too.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from . import kernels
from .assembly import cell_geometry, physical_quadrature
from .errors import UndefinedRateError
from .params import PhysicalParams

ZETA = 1.0 / (60.0 * math.pi ** 4)
PI = math.pi


# S(x) = sin^2(pi x) sin(2 pi x) and its derivatives
def _S(x, k=0):
    s2, s4 = np.sin(2 * PI * x), np.sin(4 * PI * x)
    c2, c4 = np.cos(2 * PI * x), np.cos(4 * PI * x)
    if k == 0:
        return 0.5 * s2 - 0.25 * s4
    if k == 1:
        return PI * (c2 - c4)
    if k == 2:
        return PI ** 2 * (-2 * s2 + 4 * s4)
    if k == 3:
        return PI ** 3 * (-4 * c2 + 16 * c4)
    if k == 4:
        return PI ** 4 * (8 * s2 - 64 * s4)
    raise ValueError(k)


def _A(x, k=0):
    # antiderivative of S vanishing at 0 and 1
    if k == 0:
        return (-np.cos(2 * PI * x) / 4 + np.cos(4 * PI * x) / 16 + 3 / 16) / PI
    return _S(x, k - 1)


@dataclass(frozen=True)
class Field:
    value: Callable
    gradient: Optional[Callable] = None


@dataclass(frozen=True)
class ExactSolution:
    """Closed-form manufactured fields; ``x`` arrays have shape (N, 3) or (N, 2)."""

    zeta: float = ZETA

    def _amp(self, t):
        return self.zeta * math.exp(-t)

    @staticmethod
    def _cols(x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return x, x[:, 0], x[:, 1]

    # fluid ---------------------------------------------------------------
    def u(self, x, t):
        x, X, Y = self._cols(x)
        Zs = x[:, 2] + 1.0
        a = self._amp(t)
        out = np.zeros((x.shape[0], 3))
        out[:, 0] = a * _A(X) * _S(Y) * 0.5 * PI * np.sin(PI * Zs)
        out[:, 2] = -a * _S(X) * _S(Y) * np.sin(0.5 * PI * Zs) ** 2
        return out

    def u_t(self, x, t):
        return -self.u(x, t)

    def grad_u(self, x, t):
        """Array (N, 3, 3) with entry [n, i, j] = d u_i / d x_j."""
        x, X, Y = self._cols(x)
        Zs = x[:, 2] + 1.0
        a = self._amp(t)
        P, dP = 0.5 * PI * np.sin(PI * Zs), 0.5 * PI ** 2 * np.cos(PI * Zs)
        R = np.sin(0.5 * PI * Zs) ** 2
        g = np.zeros((x.shape[0], 3, 3))
        g[:, 0, 0] = a * _S(X) * _S(Y) * P
        g[:, 0, 1] = a * _A(X) * _S(Y, 1) * P
        g[:, 0, 2] = a * _A(X) * _S(Y) * dP
        g[:, 2, 0] = -a * _S(X, 1) * _S(Y) * R
        g[:, 2, 1] = -a * _S(X) * _S(Y, 1) * R
        g[:, 2, 2] = -a * _S(X) * _S(Y) * P
        return g

    def lap_u(self, x, t):
        x, X, Y = self._cols(x)
        Zs = x[:, 2] + 1.0
        a = self._amp(t)
        P = 0.5 * PI * np.sin(PI * Zs)
        R, d2R = np.sin(0.5 * PI * Zs) ** 2, 0.5 * PI ** 2 * np.cos(PI * Zs)
        out = np.zeros((x.shape[0], 3))
        out[:, 0] = a * P * (_S(X, 1) * _S(Y) + _A(X) * _S(Y, 2) - PI ** 2 * _A(X) * _S(Y))
        out[:, 2] = -a * (_S(X, 2) * _S(Y) * R + _S(X) * _S(Y, 2) * R + _S(X) * _S(Y) * d2R)
        return out

    def div_u(self, x, t):
        return np.trace(self.grad_u(x, t), axis1=1, axis2=2)

    def p(self, x, t):
        return np.zeros(np.atleast_2d(x).shape[0])

    def grad_p(self, x, t):
        x = np.atleast_2d(x)
        return np.zeros((x.shape[0], x.shape[1]))

    # plate ---------------------------------------------------------------
    def w(self, x, t):
        _, X, Y = self._cols(x)
        return self._amp(t) * _S(X) * _S(Y)

    def w_t(self, x, t):
        return -self.w(x, t)

    def w_tt(self, x, t):
        return self.w(x, t)

    def grad_w(self, x, t):
        _, X, Y = self._cols(x)
        a = self._amp(t)
        return np.column_stack([a * _S(X, 1) * _S(Y), a * _S(X) * _S(Y, 1)])

    def lap_w(self, x, t):
        _, X, Y = self._cols(x)
        return self._amp(t) * (_S(X, 2) * _S(Y) + _S(X) * _S(Y, 2))

    def z(self, x, t):
        return -self.lap_w(x, t)

    def z_tt(self, x, t):
        return self.z(x, t)

    def grad_z(self, x, t):
        _, X, Y = self._cols(x)
        a = self._amp(t)
        return -a * np.column_stack([
            _S(X, 3) * _S(Y) + _S(X, 1) * _S(Y, 2),
            _S(X, 2) * _S(Y, 1) + _S(X) * _S(Y, 3),
        ])

    def lap_z(self, x, t):
        _, X, Y = self._cols(x)
        return -self._amp(t) * (_S(X, 4) * _S(Y) + 2 * _S(X, 2) * _S(Y, 2) + _S(X) * _S(Y, 4))

    def field(self, name):
        """Value/gradient pair for ``u``, ``p``, ``w``, ``z`` or ``w_t``."""
        grads = {"u": self.grad_u, "p": self.grad_p, "w": self.grad_w, "z": self.grad_z,
                 "w_t": lambda x, t: -self.grad_w(x, t)}
        return Field(getattr(self, name), grads.get(name))


def fluid_forcing(x, t, params=None, exact=None):
    """f = rho_f u_t - nu_f lap u + grad p, shape (N, 3)."""
    params = params or PhysicalParams()
    exact = exact or ExactSolution()
    return params.rho_f * exact.u_t(x, t) - params.nu_f * exact.lap_u(x, t) + exact.grad_p(x, t)


def plate_forcing(x, t, params=None, omega=None, exact=None):
    """f_p = omega (rho_p w_tt + rho z_tt) - D lap z - g - s with g = s = 0."""
    params = params or PhysicalParams()
    exact = exact or ExactSolution()
    om = params.omega if omega is None else omega
    return (om * (params.rho_p * exact.w_tt(x, t) + params.rho_rot * exact.z_tt(x, t))
            - params.D * exact.lap_z(x, t))


def _call(f, x, t):
    return f(x) if t is None else f(x, t)


def error_norm(space, coeffs, exact, t=None, norm="L2", exactness=8):
    """``||u_h - u||`` in L2 or full H1 using an exactness-8 quadrature.

    ``exact`` is a callable ``f(x[, t])`` or an object with ``value`` and
    ``gradient`` callables (see :meth:`ExactSolution.field`).
    """
    norm = norm.upper()
    if norm not in ("L2", "H1"):
        raise ValueError(f"unknown norm {norm!r}")
    value = getattr(exact, "value", exact)
    gradient = getattr(exact, "gradient", None)
    if norm == "H1" and gradient is None:
        raise ValueError("H1 norm needs an exact gradient")
    x, wdet, rule = physical_quadrature(space.mesh, exactness)
    nc, nq, d = x.shape
    m = space.components
    c = np.asarray(coeffs, dtype=float).reshape(m, space.n_scalar)
    local = np.ascontiguousarray(c[:, space.dofmap].transpose(1, 0, 2))       # (C, m, nloc)
    phi = space.element.values(rule.points)
    uh = np.einsum("cmi,qi->cqm", local, phi)
    pts = x.reshape(-1, d)
    ue = np.asarray(_call(value, pts, t), dtype=float).reshape(nc, nq, m)
    total = np.sum(wdet[:, :, None] * (uh - ue) ** 2)
    if norm == "H1":
        g = cell_geometry(space.mesh)
        gh = kernels.field_gradients(g.invJ, local, space.element.gradients(rule.points))
        ge = np.asarray(_call(gradient, pts, t), dtype=float).reshape(nc, nq, m, d)
        total += np.sum(wdet[:, :, None, None] * (gh - ge) ** 2)
    return float(np.sqrt(total))


def observed_rate(errors, steps):
    """Rates ``log(e[i-1]/e[i]) / log(s[i-1]/s[i])`` for consecutive levels."""
    e = np.asarray(errors, dtype=float)
    s = np.asarray(steps, dtype=float)
    if e.size < 2 or e.size != s.size:
        raise UndefinedRateError("need at least two (error, step) pairs of equal length")
    if np.any(~np.isfinite(e)) or np.any(e <= 0):
        raise UndefinedRateError("errors must be positive and finite")
    if np.any(s <= 0) or np.any(np.diff(s) >= 0):
        raise UndefinedRateError("steps must be positive and strictly decreasing")
    return list(np.log(e[:-1] / e[1:]) / np.log(s[:-1] / s[1:]))
