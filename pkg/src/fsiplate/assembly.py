"""Sparse assembly of the mass, stiffness, divergence, coupling and load terms."""
from __future__ import annotations

import weakref
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import kernels
from .elements import quadrature_rule
from .errors import InvalidArgumentError
from .mesh import Mesh3D
from .spaces import _edge_ids, _edge_lookup, build_space

SparseMatrix = sp.csr_matrix

_GEOMETRY = weakref.WeakKeyDictionary()


@dataclass(frozen=True)
class CellGeometry:
    J: np.ndarray        # (C, d, d)
    invJ: np.ndarray     # (C, d, d)
    det: np.ndarray      # (C,) signed
    origin: np.ndarray   # (C, d)

    @property
    def absdet(self):
        return np.abs(self.det)


def cell_geometry(mesh):
    """Affine maps of every cell of ``mesh`` (cached per mesh)."""
    g = _GEOMETRY.get(mesh)
    if g is None:
        invJ, det, origin = kernels.affine_maps(mesh.vertices, mesh.cells)
        p = mesh.vertices[mesh.cells]
        J = np.transpose(p[:, 1:] - p[:, :1], (0, 2, 1))
        g = CellGeometry(J, invJ, det, origin)
        _GEOMETRY[mesh] = g
    return g


def physical_quadrature(mesh, exactness):
    """Quadrature points (C, Q, d) and weights times |det J| (C, Q)."""
    rule = quadrature_rule(mesh_kind(mesh), exactness)
    g = cell_geometry(mesh)
    x = g.origin[:, None, :] + np.einsum("cij,qj->cqi", g.J, rule.points)
    return x, g.absdet[:, None] * rule.weights[None, :], rule


def mesh_kind(mesh):
    return "tetrahedron" if mesh.dim == 3 else "triangle"


def _finalize(rows, cols, vals, shape):
    A = sp.coo_matrix((vals, (rows, cols)), shape=shape).tocsr()
    A.sum_duplicates()
    A.sort_indices()
    return A


def _expand_components(A_scalar, components):
    if components == 1:
        return A_scalar
    return _finalize_csr(sp.kron(sp.identity(components, format="csr"), A_scalar, format="csr"))


def _finalize_csr(A):
    A = sp.csr_matrix(A)
    A.sum_duplicates()
    A.sort_indices()
    return A


def _default_exactness(*degrees):
    # integrand degree plus one margin, capped at the largest rule
    return min(sum(degrees) + 1, 8)


def assemble_mixed_mass(test, trial, coefficient=1.0, exactness=None):
    """Scalar mass-type matrix ``(phi_j^trial, psi_i^test)`` on a shared mesh."""
    if test.mesh is not trial.mesh:
        raise InvalidArgumentError("test and trial spaces live on different meshes")
    q = _default_exactness(test.degree, trial.degree) if exactness is None else exactness
    rule = quadrature_rule(mesh_kind(test.mesh), q)
    psi = test.element.values(rule.points)
    phi = trial.element.values(rule.points)
    ref = np.einsum("q,qi,qj->ij", rule.weights, psi, phi)
    absdet = cell_geometry(test.mesh).absdet
    local = float(coefficient) * absdet[:, None, None] * ref[None]
    r, c, v = kernels.scatter_triplets(test.dofmap, trial.dofmap, local)
    return _finalize(r, c, v, (test.n_scalar, trial.n_scalar))


def assemble_mass(space, coefficient=1.0, exactness=None):
    """M_ij = coefficient * int phi_j phi_i (block diagonal over components)."""
    M = assemble_mixed_mass(space, space, coefficient, exactness)
    return _expand_components(M, space.components)


def assemble_stiffness(space, coefficient=1.0, exactness=None):
    """K_ij = coefficient * int grad phi_j . grad phi_i (block diagonal over components)."""
    k = space.degree
    q = max(2 * (k - 1), 1) if exactness is None else exactness
    rule = quadrature_rule(mesh_kind(space.mesh), q)
    R = kernels.reference_stiffness_tensor(space.element.gradients(rule.points), rule.weights)
    g = cell_geometry(space.mesh)
    local = kernels.local_stiffness(g.invJ, g.absdet, R)
    if coefficient != 1.0:
        local = float(coefficient) * local
    r, c, v = kernels.scatter_triplets(space.dofmap, space.dofmap, local)
    K = _finalize(r, c, v, (space.n_scalar, space.n_scalar))
    return _expand_components(K, space.components)


def assemble_divergence(vel, pres, exactness=None):
    """B_qj = int q div(phi_j) with rows in ``pres`` and columns in ``vel``."""
    if vel.mesh is not pres.mesh:
        raise InvalidArgumentError("velocity and pressure spaces must share a mesh")
    if vel.components != vel.dim or pres.components != 1:
        raise InvalidArgumentError("divergence needs a vector velocity and a scalar pressure")
    q = _default_exactness(pres.degree, vel.degree - 1) if exactness is None else exactness
    rule = quadrature_rule(mesh_kind(vel.mesh), q)
    D = kernels.reference_divergence_tensor(
        pres.element.values(rule.points), vel.element.gradients(rule.points), rule.weights
    )
    g = cell_geometry(vel.mesh)
    local = kernels.local_divergence(g.invJ, g.absdet, D)          # (C, ni, d, nj)
    nc, ni, d, nj = local.shape
    col_map = np.concatenate([k * vel.n_scalar + vel.dofmap for k in range(d)], axis=1)
    r, c, v = kernels.scatter_triplets(pres.dofmap, col_map, local.reshape(nc, ni, d * nj))
    return _finalize(r, c, v, (pres.n_scalar, vel.dof_count))


def trace_node_map(fluid_space, plate_space, trace, tol=1e-12):
    """Fluid scalar node index for every scalar node of a plate space of equal degree."""
    if fluid_space.degree != plate_space.degree:
        raise InvalidArgumentError("trace map needs equal degrees on both sides")
    fmesh, pmesh = fluid_space.mesh, plate_space.mesh
    if not isinstance(fmesh, Mesh3D) or pmesh.dim != 2:
        raise InvalidArgumentError("expected a fluid space on a 3D mesh and a plate space on a 2D mesh")
    vmap = np.asarray(trace.vertex_map)
    if vmap.shape[0] != pmesh.vertices.shape[0]:
        raise InvalidArgumentError("trace map does not match the plate mesh")
    nodes = [vmap]
    if plate_space.degree == 2:
        pedges, _ = pmesh.edges
        nv = fmesh.vertices.shape[0]
        fedges, _ = fmesh.edges
        try:
            ids = _edge_ids(vmap[pedges], _edge_lookup(fedges, nv), nv)
        except KeyError as exc:
            raise InvalidArgumentError("plate edge has no matching fluid edge") from exc
        nodes.append(nv + ids)
    out = np.concatenate(nodes)
    fx = fluid_space.node_coords[out]
    scale = max(b - a for a, b in fmesh.bounds)
    ztop = fmesh.bounds[2][1]
    if (np.max(np.abs(fx[:, :2] - plate_space.node_coords)) > tol * scale
            or np.max(np.abs(fx[:, 2] - ztop)) > tol * scale):
        raise InvalidArgumentError("non-conforming trace: plate and fluid nodes do not coincide")
    return out


def assemble_interface_velocity_coupling(vel, mult, trace, exactness=None):
    """C_gj = int_plate lambda_g (phi_j)_3, rows in ``mult`` and columns in ``vel``."""
    if vel.components != 3 or mult.mesh.dim != 2:
        raise InvalidArgumentError("expected a 3-component fluid velocity and a plate multiplier space")
    ptrace = build_space(mult.mesh, vel.degree)
    nodes = trace_node_map(vel, ptrace, trace)
    C = assemble_mixed_mass(mult, ptrace, exactness=exactness).tocoo()
    cols = 2 * vel.n_scalar + nodes[C.col]
    return _finalize(C.row, cols, C.data, (mult.n_scalar, vel.dof_count))


def assemble_plate_multiplier_coupling(plate, mult, exactness=None):
    """C_gi = int_plate lambda_g eta_i, rows in ``mult`` and columns in ``plate``."""
    return assemble_mixed_mass(mult, plate, exactness=exactness)


def basis_integrals(space):
    """Vector of int phi_i for a scalar space."""
    rule = quadrature_rule(mesh_kind(space.mesh), space.degree)
    ref = rule.weights @ space.element.values(rule.points)
    absdet = cell_geometry(space.mesh).absdet
    return np.bincount(space.dofmap.ravel(), (absdet[:, None] * ref[None]).ravel(), minlength=space.n_scalar)


def assemble_mean_columns(plate, pres):
    """Columns ``r_i = int_plate eta_i`` and ``m_q = int_fluid q``."""
    return basis_integrals(plate), basis_integrals(pres)


def assemble_load(space, f, t=None, exactness=8):
    """L2 load vector ``int f . phi_i``; ``f`` is a callable ``f(x)`` / ``f(x, t)`` or a constant."""
    x, wdet, rule = physical_quadrature(space.mesh, exactness)
    nc, nq, d = x.shape
    m = space.components
    if callable(f):
        pts = x.reshape(-1, d)
        vals = np.asarray(f(pts) if t is None else f(pts, t), dtype=float)
    else:
        vals = np.asarray(f, dtype=float)
    vals = np.broadcast_to(vals, (nc * nq,) if m == 1 else (nc * nq, m)).reshape(nc, nq, m)
    phi = space.element.values(rule.points)
    local = np.einsum("cq,cqm,qi->mci", wdet, vals, phi)
    out = np.empty(space.dof_count)
    idx = space.dofmap.ravel()
    for c in range(m):
        out[c * space.n_scalar:(c + 1) * space.n_scalar] = np.bincount(
            idx, local[c].ravel(), minlength=space.n_scalar
        )
    return out


@dataclass
class BlockSystem:
    """Named sparse blocks and right-hand sides of a coupled system.

    Blocks are keyed by (test role, trial role) strings such as ``("U", "U")``
    or by a short name like ``"M_u"``; ``shapes`` records the expected shape of
    every block and is checked by :meth:`validate`.
    """

    blocks: dict = field(default_factory=dict)
    rhs: dict = field(default_factory=dict)
    shapes: dict = field(default_factory=dict)

    def add(self, name, matrix, shape=None):
        self.blocks[name] = matrix
        if shape is not None:
            self.shapes[name] = tuple(shape)

    def __getitem__(self, name):
        return self.blocks[name]

    def validate(self):
        for name, shape in self.shapes.items():
            if self.blocks[name].shape != shape:
                raise InvalidArgumentError(f"block {name}: shape {self.blocks[name].shape} != {shape}")
        return True


def export_coo(path, A):
    """Write ``A`` as lines ``row col value`` (0-based) for debugging."""
    C = sp.coo_matrix(A)
    with open(path, "w") as fh:
        fh.write(f"% {C.shape[0]} {C.shape[1]} {C.nnz}\n")
        for i, j, v in zip(C.row, C.col, C.data):
            fh.write(f"{int(i)} {int(j)} {float(v)!r}\n")
