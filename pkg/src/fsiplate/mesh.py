"""Structured simplicial meshes of the fluid box and the plate square.

The fluid box is split into ``nx*ny*nz`` hexahedral cells, each cut into six
tetrahedra sharing the cell's main diagonal (Kuhn/Freudenthal split). Because
the split is translation invariant the result is conforming. The plate mesh is
the exact trace of the fluid mesh on the top plane ``z = z1``.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import InvalidArgumentError, InvalidMeshError

TAG_S = 0
TAG_PLATE = 1

LOCAL_EDGES = {
    3: ((0, 1), (1, 2), (0, 2)),
    4: ((0, 1), (1, 2), (0, 2), (0, 3), (1, 3), (2, 3)),
}


def _freeze(*arrays):
    for a in arrays:
        a.flags.writeable = False


def unique_edges(cells):
    """Global edge list and the cell-to-edge map, in LOCAL_EDGES order."""
    cells = np.asarray(cells)
    pairs = LOCAL_EDGES[cells.shape[1]]
    local = np.stack([np.sort(cells[:, list(p)], axis=1) for p in pairs], axis=1)
    flat = local.reshape(-1, 2)
    edges, inverse = np.unique(flat, axis=0, return_inverse=True)
    return edges, inverse.reshape(cells.shape[0], len(pairs))


def _simplex_diameters(vertices, cells):
    pts = vertices[cells]
    out = np.zeros(cells.shape[0])
    for i, j in itertools.combinations(range(cells.shape[1]), 2):
        out = np.maximum(out, np.linalg.norm(pts[:, i] - pts[:, j], axis=1))
    return out


@dataclass(frozen=True, eq=False)
class Mesh3D:
    vertices: np.ndarray          # (N, 3)
    tets: np.ndarray              # (T, 4), positively oriented
    boundary_faces: np.ndarray    # (F, 3)
    face_tags: np.ndarray         # (F,) TAG_S or TAG_PLATE
    face_owner: np.ndarray        # (F,) owning tet
    divisions: tuple
    bounds: tuple                 # ((x0, x1), (y0, y1), (z0, z1))
    h: float = field(default=0.0)

    @property
    def dim(self):
        return 3

    @property
    def cells(self):
        return self.tets

    @cached_property
    def edges(self):
        return unique_edges(self.tets)

    def volumes(self):
        p = self.vertices[self.tets]
        return np.linalg.det(p[:, 1:] - p[:, :1]) / 6.0

    def plate_faces(self):
        return np.flatnonzero(self.face_tags == TAG_PLATE)

    @property
    def measure(self):
        (x0, x1), (y0, y1), (z0, z1) = self.bounds
        return (x1 - x0) * (y1 - y0) * (z1 - z0)


@dataclass(frozen=True, eq=False)
class Mesh2D:
    vertices: np.ndarray          # (N, 2)
    tris: np.ndarray              # (T, 3), counter-clockwise
    boundary_edges: np.ndarray    # (E, 2)
    h: float = field(default=0.0)

    @property
    def dim(self):
        return 2

    @property
    def cells(self):
        return self.tris

    @cached_property
    def edges(self):
        return unique_edges(self.tris)

    def areas(self):
        p = self.vertices[self.tris]
        e1 = p[:, 1] - p[:, 0]
        e2 = p[:, 2] - p[:, 0]
        return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

    @property
    def measure(self):
        return float(self.areas().sum())


@dataclass(frozen=True, eq=False)
class TraceMap:
    """Identification of the plate mesh with the PLATE part of the fluid boundary.

    ``face_to_tri[i]`` is the plate triangle of PLATE face ``plate_faces[i]``;
    ``vertex_map[j]`` is the fluid vertex carrying plate vertex ``j``;
    ``orientation[i]`` is +1 when the stored fluid face ordering projects
    counter-clockwise, -1 otherwise.
    """

    plate_faces: np.ndarray
    face_to_tri: np.ndarray
    vertex_map: np.ndarray
    orientation: np.ndarray


def _kuhn_cell_tets():
    tets = []
    for perm in itertools.permutations(range(3)):
        path = [np.zeros(3, dtype=int)]
        for axis in perm:
            nxt = path[-1].copy()
            nxt[axis] = 1
            path.append(nxt)
        tets.append([tuple(p) for p in path])
    return tets


def build_box_fluid_mesh(nx, ny, nz, bounds=((0.0, 1.0), (0.0, 1.0), (-1.0, 0.0))):
    """Kuhn-split structured tetrahedral mesh of an axis-aligned box.

    Faces on the top plane ``z = bounds[2][1]`` are tagged PLATE, every other
    boundary face S.
    """
    for name, n in (("nx", nx), ("ny", ny), ("nz", nz)):
        if int(n) != n or n < 1:
            raise InvalidArgumentError(f"{name} must be a positive integer, got {n!r}")
    nx, ny, nz = int(nx), int(ny), int(nz)
    bounds = tuple((float(a), float(b)) for a, b in bounds)
    if len(bounds) != 3 or any(b <= a for a, b in bounds):
        raise InvalidArgumentError(f"degenerate bounds {bounds!r}")

    xs = np.linspace(*bounds[0], nx + 1)
    ys = np.linspace(*bounds[1], ny + 1)
    zs = np.linspace(*bounds[2], nz + 1)
    X, Y, Z = np.meshgrid(xs, ys, zs, indexing="ij")
    vertices = np.column_stack([X.ravel(order="F"), Y.ravel(order="F"), Z.ravel(order="F")])

    def vid(i, j, k):
        return i + (nx + 1) * (j + (ny + 1) * k)

    I, J, K = np.meshgrid(np.arange(nx), np.arange(ny), np.arange(nz), indexing="ij")
    I, J, K = I.ravel(order="F"), J.ravel(order="F"), K.ravel(order="F")
    tets = []
    for path in _kuhn_cell_tets():
        tets.append(np.column_stack([vid(I + a, J + b, K + c) for a, b, c in path]))
    tets = np.stack(tets, axis=1).reshape(-1, 4)

    p = vertices[tets]
    vol = np.linalg.det(p[:, 1:] - p[:, :1])
    neg = vol < 0
    tets[neg] = tets[neg][:, [0, 2, 1, 3]]

    faces = np.concatenate([tets[:, [1, 2, 3]], tets[:, [0, 3, 2]], tets[:, [0, 1, 3]], tets[:, [0, 2, 1]]])
    owner = np.tile(np.arange(tets.shape[0]), 4)
    keys = np.sort(faces, axis=1)
    _, first, counts = np.unique(keys, axis=0, return_index=True, return_counts=True)
    bidx = first[counts == 1]
    bidx.sort()
    bfaces = faces[bidx]
    bowner = owner[bidx]

    ztop = bounds[2][1]
    tol = 1e-12 * max(b - a for a, b in bounds)
    on_top = np.all(np.abs(vertices[bfaces, 2] - ztop) <= tol, axis=1)
    tags = np.where(on_top, TAG_PLATE, TAG_S).astype(np.int8)

    h = float(_simplex_diameters(vertices, tets).max())
    _freeze(vertices, tets, bfaces, tags, bowner)
    return Mesh3D(vertices, tets, bfaces, tags, bowner, (nx, ny, nz), bounds, h)


def extract_plate_mesh(m: Mesh3D):
    """Project the PLATE faces of ``m`` onto the (x, y) plane.

    Returns the plate :class:`Mesh2D` and the :class:`TraceMap` tying it to ``m``.
    """
    pf = m.plate_faces()
    if pf.size == 0:
        raise InvalidMeshError("mesh has no PLATE-tagged faces")
    faces = m.boundary_faces[pf]
    fluid_vids, inverse = np.unique(faces.ravel(), return_inverse=True)
    tris = inverse.reshape(-1, 3).copy()
    verts2 = m.vertices[fluid_vids][:, :2].copy()

    p = verts2[tris]
    e1 = p[:, 1] - p[:, 0]
    e2 = p[:, 2] - p[:, 0]
    cross = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
    orientation = np.where(cross > 0, 1, -1).astype(np.int8)
    flip = cross < 0
    tris[flip] = tris[flip][:, [0, 2, 1]]

    edges, cell_edges = unique_edges(tris)
    counts = np.bincount(cell_edges.ravel(), minlength=edges.shape[0])
    bedges = edges[counts == 1].copy()

    h = float(_simplex_diameters(verts2, tris).max())
    face_to_tri = np.arange(tris.shape[0])
    vertex_map = fluid_vids.copy()
    _freeze(verts2, tris, bedges, pf, face_to_tri, vertex_map, orientation)
    plate = Mesh2D(verts2, tris, bedges, h)
    return plate, TraceMap(pf, face_to_tri, vertex_map, orientation)


def mesh_size(m):
    """Largest element diameter."""
    if m.cells.shape[0] == 0:
        raise InvalidMeshError("empty mesh")
    return float(_simplex_diameters(m.vertices, m.cells).max())


def write_mesh(path, m):
    """Dump vertices, connectivity and (3D) boundary tags as plain text; for debugging only."""
    with open(path, "w") as fh:
        fh.write(f"dim {m.dim}\nvertices {m.vertices.shape[0]}\n")
        for v in m.vertices:
            fh.write(" ".join(repr(float(c)) for c in v) + "\n")
        fh.write(f"cells {m.cells.shape[0]}\n")
        for c in m.cells:
            fh.write(" ".join(str(int(i)) for i in c) + "\n")
        if isinstance(m, Mesh3D):
            fh.write(f"boundary_faces {m.boundary_faces.shape[0]}\n")
            for f, t in zip(m.boundary_faces, m.face_tags):
                fh.write(f"{f[0]} {f[1]} {f[2]} {'PLATE' if t == TAG_PLATE else 'S'}\n")
        else:
            fh.write(f"boundary_edges {m.boundary_edges.shape[0]}\n")
            for e in m.boundary_edges:
                fh.write(f"{e[0]} {e[1]}\n")
