"""Reference Lagrange elements (P1, P2) and quadrature on triangles and tetrahedra."""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi

from .errors import UnsupportedDegreeError
from .mesh import LOCAL_EDGES

TRIANGLE = "triangle"
TETRAHEDRON = "tetrahedron"
_DIM = {TRIANGLE: 2, TETRAHEDRON: 3}
MAX_EXACTNESS = 8


def reference_measure(kind):
    return 1.0 / math.factorial(_DIM[kind])


def reference_vertices(kind):
    d = _DIM[kind]
    return np.vstack([np.zeros(d), np.eye(d)])


def barycentric(kind, X):
    X = np.atleast_2d(np.asarray(X, dtype=float))
    return np.column_stack([1.0 - X.sum(axis=1), X])


def barycentric_gradients(kind):
    d = _DIM[kind]
    return np.vstack([-np.ones(d), np.eye(d)])


@dataclass(frozen=True)
class QuadratureRule:
    kind: str
    exactness: int
    points: np.ndarray
    weights: np.ndarray


def _gauss_jacobi01(m, alpha):
    # nodes/weights on [0, 1] for the weight (1 - t)**alpha
    x, w = roots_jacobi(m, alpha, 0.0)
    return (1.0 + x) / 2.0, w / 2.0 ** (alpha + 1)


@lru_cache(maxsize=None)
def quadrature_rule(kind, exactness):
    """Positive-weight rule exact for polynomials of total degree ``exactness``.

    Degrees 0-2 use the classical centroid / interior-point rules; higher
    degrees use the collapsed (conical product) Gauss-Jacobi construction.
    """
    if kind not in _DIM:
        raise ValueError(f"unknown cell kind {kind!r}")
    exactness = int(exactness)
    if exactness < 0 or exactness > MAX_EXACTNESS:
        raise UnsupportedDegreeError(f"quadrature exactness {exactness} not in [0, {MAX_EXACTNESS}]")
    d = _DIM[kind]
    vol = reference_measure(kind)
    if exactness <= 1:
        pts = np.full((1, d), 1.0 / (d + 1))
        wts = np.array([vol])
    elif exactness == 2:
        if d == 2:
            pts = np.array([[1 / 6, 1 / 6], [2 / 3, 1 / 6], [1 / 6, 2 / 3]])
        else:
            a, b = (5.0 - math.sqrt(5.0)) / 20.0, (5.0 + 3.0 * math.sqrt(5.0)) / 20.0
            pts = np.array([[a, a, a], [b, a, a], [a, b, a], [a, a, b]])
        wts = np.full(d + 1, vol / (d + 1))
    else:
        m = (exactness + 2) // 2
        if d == 2:
            u, wu = _gauss_jacobi01(m, 1.0)
            v, wv = _gauss_jacobi01(m, 0.0)
            U, V = np.meshgrid(u, v, indexing="ij")
            W = np.outer(wu, wv)
            pts = np.column_stack([U.ravel(), ((1 - U) * V).ravel()])
            wts = W.ravel()
        else:
            u, wu = _gauss_jacobi01(m, 2.0)
            v, wv = _gauss_jacobi01(m, 1.0)
            s, ws = _gauss_jacobi01(m, 0.0)
            U, V, S = np.meshgrid(u, v, s, indexing="ij")
            W = wu[:, None, None] * wv[None, :, None] * ws[None, None, :]
            pts = np.column_stack([U.ravel(), ((1 - U) * V).ravel(), ((1 - U) * (1 - V) * S).ravel()])
            wts = W.ravel()
    pts.flags.writeable = False
    wts.flags.writeable = False
    return QuadratureRule(kind, exactness, pts, wts)


@dataclass(frozen=True)
class ReferenceElement:
    kind: str
    degree: int

    @property
    def dim(self):
        return _DIM[self.kind]

    @property
    def edges(self):
        return LOCAL_EDGES[self.dim + 1]

    @property
    def ndof(self):
        n = self.dim + 1
        return n if self.degree == 1 else n + len(self.edges)

    def node_barycentric(self):
        n = self.dim + 1
        lam = list(np.eye(n))
        if self.degree == 2:
            lam += [0.5 * (np.eye(n)[i] + np.eye(n)[j]) for i, j in self.edges]
        return np.array(lam)

    def nodes(self):
        """Reference coordinates of the DOF nodes."""
        return self.node_barycentric()[:, 1:]

    def values(self, X):
        """Shape values, array of shape (npoints, ndof)."""
        L = barycentric(self.kind, X)
        if self.degree == 1:
            return L
        vert = L * (2.0 * L - 1.0)
        edge = np.column_stack([4.0 * L[:, i] * L[:, j] for i, j in self.edges])
        return np.hstack([vert, edge])

    def gradients(self, X):
        """Reference shape gradients, array of shape (npoints, ndof, dim)."""
        L = barycentric(self.kind, X)
        G = barycentric_gradients(self.kind)
        npts = L.shape[0]
        if self.degree == 1:
            return np.broadcast_to(G, (npts,) + G.shape).copy()
        vert = (4.0 * L - 1.0)[:, :, None] * G[None, :, :]
        edge = np.stack(
            [4.0 * (L[:, i, None] * G[j] + L[:, j, None] * G[i]) for i, j in self.edges], axis=1
        )
        return np.concatenate([vert, edge], axis=1)


@lru_cache(maxsize=None)
def reference_element(kind, degree):
    if degree not in (1, 2):
        raise UnsupportedDegreeError(f"Lagrange degree {degree} not supported (1 or 2)")
    return ReferenceElement(kind, int(degree))


def kind_for_dim(dim):
    return TRIANGLE if dim == 2 else TETRAHEDRON
