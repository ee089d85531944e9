import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fsiplate.errors import InvalidArgumentError, InvalidMeshError
from fsiplate.mesh import (
    TAG_PLATE,
    TAG_S,
    build_box_fluid_mesh,
    extract_plate_mesh,
    mesh_size,
    write_mesh,
)

from conftest import UNIT_BOX


def test_single_cell_counts():
    m = build_box_fluid_mesh(1, 1, 1, UNIT_BOX)
    assert m.vertices.shape == (8, 3)
    assert m.tets.shape == (6, 4)
    assert m.boundary_faces.shape[0] == 12
    assert np.count_nonzero(m.face_tags == TAG_PLATE) == 2


def test_two_cell_counts_and_volume(box2):
    assert box2.vertices.shape[0] == 27
    assert box2.tets.shape[0] == 48
    assert box2.volumes().sum() == pytest.approx(1.0, rel=1e-12)


def test_plate_faces_on_top_plane(box4):
    pf = box4.boundary_faces[box4.face_tags == TAG_PLATE]
    assert pf.shape[0] == 2 * 4 ** 2
    assert np.all(box4.vertices[pf, 2] == 0.0)


def test_positive_orientation(box4):
    assert np.all(box4.volumes() > 0)


@settings(max_examples=20, deadline=None)
@given(st.integers(1, 8), st.integers(1, 8), st.integers(1, 8))
def test_volume_conservation(nx, ny, nz):
    bounds = ((0.0, 1.0), (-0.5, 1.5), (-0.7, 0.0))
    m = build_box_fluid_mesh(nx, ny, nz, bounds)
    assert m.volumes().sum() == pytest.approx(m.measure, rel=1e-12)
    plate, _ = extract_plate_mesh(m)
    assert np.all(plate.areas() > 0)
    assert plate.areas().sum() == pytest.approx(2.0, rel=1e-12)


def _face_keys(faces):
    return np.sort(faces, axis=1)


def test_watertight(box4):
    t = box4.tets
    faces = np.concatenate([t[:, [1, 2, 3]], t[:, [0, 2, 3]], t[:, [0, 1, 3]], t[:, [0, 1, 2]]])
    _, counts = np.unique(_face_keys(faces), axis=0, return_counts=True)
    assert set(np.unique(counts)) == {1, 2}
    assert np.count_nonzero(counts == 1) == box4.boundary_faces.shape[0]


def test_boundary_faces_tile_box_surface(box4):
    p = box4.vertices[box4.boundary_faces]
    area = 0.5 * np.linalg.norm(np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]), axis=1)
    assert area.sum() == pytest.approx(6.0, rel=1e-12)
    # each boundary face has all vertices on one of the six box planes
    on_plane = np.zeros(len(p), dtype=bool)
    for axis, (lo, hi) in enumerate(UNIT_BOX):
        for v in (lo, hi):
            on_plane |= np.all(p[:, :, axis] == v, axis=1)
    assert on_plane.all()


def test_boundary_face_owner(box4):
    for f, o in zip(box4.boundary_faces[:50], box4.face_owner[:50]):
        assert set(f) <= set(box4.tets[o])


def test_tagging_rule(box4):
    top = np.all(box4.vertices[box4.boundary_faces, 2] == 0.0, axis=1)
    assert np.array_equal(box4.face_tags == TAG_PLATE, top)
    assert np.all(box4.face_tags[~top] == TAG_S)


def test_invalid_divisions():
    for bad in [(0, 1, 1), (1, -2, 1), (1, 1, 1.5)]:
        with pytest.raises(InvalidArgumentError):
            build_box_fluid_mesh(*bad, UNIT_BOX)
    with pytest.raises(InvalidArgumentError):
        build_box_fluid_mesh(1, 1, 1, ((0.0, 1.0), (1.0, 1.0), (-1.0, 0.0)))


def test_plate_extraction_two(box2):
    plate, trace = extract_plate_mesh(box2)
    assert plate.tris.shape[0] == 8
    assert plate.vertices.shape[0] == 9
    assert plate.areas().sum() == pytest.approx(1.0, rel=1e-12)


def test_plate_boundary_edges(plate4):
    plate, _ = plate4
    # the square of side 1 split into 4 x 4 cells has 4 sides of 4 edges each
    assert plate.boundary_edges.shape[0] == 16
    length = np.linalg.norm(plate.vertices[plate.boundary_edges[:, 0]] - plate.vertices[plate.boundary_edges[:, 1]], axis=1)
    assert length.sum() == pytest.approx(4.0, rel=1e-12)


def test_trace_map_roundtrip(box4, plate4):
    plate, trace = plate4
    fluid = box4.vertices[trace.vertex_map]
    assert np.allclose(fluid[:, :2], plate.vertices, atol=1e-12, rtol=0)
    assert np.all(fluid[:, 2] == 0.0)
    assert np.unique(trace.vertex_map).size == trace.vertex_map.size
    # bijection between PLATE faces and triangles
    assert trace.face_to_tri.size == plate.tris.shape[0] == trace.plate_faces.size
    assert np.unique(trace.face_to_tri).size == trace.face_to_tri.size
    for i, f in enumerate(trace.plate_faces):
        tri = plate.tris[trace.face_to_tri[i]]
        assert set(trace.vertex_map[tri]) == set(box4.boundary_faces[f])


def test_no_plate_faces_is_invalid(box2):
    from dataclasses import replace

    m = replace(box2, face_tags=np.zeros_like(box2.face_tags))
    with pytest.raises(InvalidMeshError):
        extract_plate_mesh(m)


def test_mesh_sizes():
    assert mesh_size(build_box_fluid_mesh(1, 1, 1, ((0, 1), (0, 1), (0, 1)))) == pytest.approx(math.sqrt(3))
    m2 = build_box_fluid_mesh(2, 2, 2, UNIT_BOX)
    plate, _ = extract_plate_mesh(m2)
    assert mesh_size(plate) == pytest.approx(math.sqrt(2) / 2)
    m4 = build_box_fluid_mesh(4, 4, 4, UNIT_BOX)
    assert mesh_size(m4) == pytest.approx(math.sqrt(3) / 4)
    assert m4.h == pytest.approx(mesh_size(m4))


def test_deterministic():
    a = build_box_fluid_mesh(3, 2, 2, UNIT_BOX)
    b = build_box_fluid_mesh(3, 2, 2, UNIT_BOX)
    assert np.array_equal(a.tets, b.tets)
    assert np.array_equal(a.vertices, b.vertices)


def test_arrays_are_read_only(box2):
    with pytest.raises(ValueError):
        box2.vertices[0, 0] = 1.0


def test_write_mesh(tmp_path, box2):
    path = tmp_path / "m.txt"
    write_mesh(path, box2)
    lines = path.read_text().splitlines()
    assert lines[0] == "dim 3"
    assert lines[1] == "vertices 27"
    assert sum(1 for l in lines if l.endswith("PLATE")) == 8
