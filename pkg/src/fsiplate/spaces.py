"""Continuous Lagrange finite element spaces on the fluid and plate meshes."""
from __future__ import annotations

import enum
import weakref
from dataclasses import dataclass, field

import numpy as np

from .elements import kind_for_dim, reference_element
from .errors import OutOfDomainError, UnsupportedDegreeError
from .mesh import TAG_PLATE, TAG_S, Mesh2D, Mesh3D


class Role(enum.Enum):
    VELOCITY = "U_h"
    PRESSURE = "Q_h"
    PLATE_W = "W_h(w)"
    PLATE_Z = "W_h(z)"
    MULTIPLIER = "G_h"


@dataclass(frozen=True, eq=False)
class FESpace:
    """Global DOF layout of a P1/P2 space.

    Scalar DOFs are numbered vertices first, then edges. Vector spaces are
    component-major: DOF ``c * n_scalar + s`` is component ``c`` of node ``s``.
    ``fixed`` marks DOFs with a homogeneous essential condition for the role.
    """

    mesh: Mesh3D | Mesh2D
    degree: int
    components: int
    role: Role | None
    dofmap: np.ndarray            # (ncells, nloc) scalar node indices
    node_coords: np.ndarray       # (n_scalar, dim)
    fixed: np.ndarray             # (dof_count,) bool
    node_sets: dict = field(default_factory=dict)

    @property
    def element(self):
        return reference_element(kind_for_dim(self.mesh.dim), self.degree)

    @property
    def n_scalar(self):
        return self.node_coords.shape[0]

    @property
    def dof_count(self):
        return self.components * self.n_scalar

    @property
    def dim(self):
        return self.mesh.dim

    @property
    def free(self):
        return np.flatnonzero(~self.fixed)

    def component_dofs(self, c, nodes=None):
        nodes = np.arange(self.n_scalar) if nodes is None else np.asarray(nodes)
        return c * self.n_scalar + nodes

    def dof_coordinates(self):
        return np.tile(self.node_coords, (self.components, 1))


def _edge_lookup(edges, nv):
    keys = edges[:, 0].astype(np.int64) * nv + edges[:, 1]
    order = np.argsort(keys)
    return keys[order], order


def _edge_ids(pairs, lookup, nv):
    keys_sorted, order = lookup
    pairs = np.sort(np.asarray(pairs).reshape(-1, 2), axis=1)
    q = pairs[:, 0].astype(np.int64) * nv + pairs[:, 1]
    pos = np.searchsorted(keys_sorted, q)
    if np.any(pos >= keys_sorted.size) or np.any(keys_sorted[np.minimum(pos, keys_sorted.size - 1)] != q):
        raise KeyError("edge not in mesh")
    return order[pos]


def _nodes_of(simplices, degree, mesh):
    """Scalar node indices living on the closure of the given boundary simplices."""
    nv = mesh.vertices.shape[0]
    nodes = [np.unique(simplices)]
    if degree == 2:
        edges, _ = mesh.edges
        lookup = _edge_lookup(edges, nv)
        k = simplices.shape[1]
        pairs = [simplices[:, [i, j]] for i in range(k) for j in range(i + 1, k)]
        nodes.append(nv + np.unique(_edge_ids(np.concatenate(pairs), lookup, nv)))
    return np.concatenate(nodes)


def build_space(mesh, degree, components=1, role=None):
    """Global continuous Lagrange space of the given degree on ``mesh``."""
    if degree not in (1, 2):
        raise UnsupportedDegreeError(f"Lagrange degree {degree} not supported (1 or 2)")
    if isinstance(role, str):
        role = Role[role] if role in Role.__members__ else Role(role)
    nv = mesh.vertices.shape[0]
    cells = mesh.cells
    if degree == 1:
        dofmap = cells.copy()
        coords = mesh.vertices.copy()
    else:
        edges, cell_edges = mesh.edges
        dofmap = np.hstack([cells, nv + cell_edges])
        coords = np.vstack([mesh.vertices, 0.5 * (mesh.vertices[edges[:, 0]] + mesh.vertices[edges[:, 1]])])

    n = coords.shape[0]
    fixed = np.zeros(components * n, dtype=bool)
    node_sets = {}
    if isinstance(mesh, Mesh3D):
        s_nodes = _nodes_of(mesh.boundary_faces[mesh.face_tags == TAG_S], degree, mesh)
        top_nodes = _nodes_of(mesh.boundary_faces[mesh.face_tags == TAG_PLATE], degree, mesh)
        node_sets["S"] = s_nodes
        node_sets["PLATE"] = top_nodes
        node_sets["interface"] = np.setdiff1d(top_nodes, s_nodes)
        if role is Role.VELOCITY:
            if components != 3:
                raise ValueError("velocity space must have 3 components")
            boundary = np.union1d(s_nodes, top_nodes)
            fixed[boundary] = True
            fixed[n + boundary] = True
            fixed[2 * n + s_nodes] = True
    else:
        b_nodes = _nodes_of(mesh.boundary_edges, degree, mesh)
        node_sets["boundary"] = b_nodes
        if role in (Role.PLATE_W, Role.PLATE_Z):
            for c in range(components):
                fixed[c * n + b_nodes] = True

    for a in (dofmap, coords, fixed):
        a.flags.writeable = False
    return FESpace(mesh, degree, components, role, dofmap, coords, fixed, node_sets)


def interpolate(space, f, t=None):
    """Nodal interpolant of ``f``; ``f(x)`` or ``f(x, t)`` with ``x`` of shape (N, dim).

    Scalar spaces expect shape (N,), vector spaces (N, components).
    """
    x = space.node_coords
    vals = np.asarray(f(x) if t is None else f(x, t), dtype=float)
    if space.components == 1:
        vals = np.broadcast_to(vals, (x.shape[0],))
        return np.array(vals, dtype=float)
    vals = np.broadcast_to(vals, (x.shape[0], space.components))
    return np.array(vals.T.ravel(), dtype=float)


class _Locator:
    def __init__(self, mesh):
        p = mesh.vertices[mesh.cells]
        J = np.transpose(p[:, 1:] - p[:, :1], (0, 2, 1))
        self.origin = p[:, 0]
        self.invJ = np.linalg.inv(J)
        self.lo = p.min(axis=1)
        self.hi = p.max(axis=1)
        self.scale = float(np.max(mesh.vertices.max(axis=0) - mesh.vertices.min(axis=0)))

    def locate(self, x, tol=1e-12):
        tol = tol * self.scale
        cand = np.flatnonzero(np.all((self.lo - tol <= x) & (x <= self.hi + tol), axis=1))
        if cand.size:
            X = np.einsum("cij,cj->ci", self.invJ[cand], x - self.origin[cand])
            lam_min = np.minimum(X.min(axis=1), 1.0 - X.sum(axis=1))
            k = int(np.argmax(lam_min))
            if lam_min[k] >= -1e-10:
                return int(cand[k]), X[k]
        raise OutOfDomainError(f"point {x} outside the mesh")


_LOCATORS = weakref.WeakKeyDictionary()


def _locator(mesh):
    loc = _LOCATORS.get(mesh)
    if loc is None:
        loc = _LOCATORS[mesh] = _Locator(mesh)
    return loc


def evaluate(space, coeffs, point):
    """Value of the discrete function at one point (or an (N, dim) batch)."""
    pts = np.atleast_2d(np.asarray(point, dtype=float))
    single = np.ndim(point) == 1
    loc = _locator(space.mesh)
    coeffs = np.asarray(coeffs, dtype=float).reshape(space.components, space.n_scalar)
    out = np.empty((pts.shape[0], space.components))
    el = space.element
    for i, x in enumerate(pts):
        cell, X = loc.locate(x)
        phi = el.values(X[None, :])[0]
        out[i] = coeffs[:, space.dofmap[cell]] @ phi
    if space.components == 1:
        out = out[:, 0]
    return out[0] if single else out
