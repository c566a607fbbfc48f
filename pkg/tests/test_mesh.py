import json
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hstv.mesh import (
    MeshError,
    Triangulation,
    VertexSet,
    audit_mesh,
    check_delaunay,
    check_nondegenerate,
    check_uniform,
    covering_certificate,
    mesh_from_json,
    mesh_to_json,
)


def unit_square_mesh():
    verts = [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (1.0, 1.0)]
    return Triangulation.from_data(
        VertexSet.from_points(verts), [(0, 1, 3), (0, 3, 2)]
    )


def lattice_mesh(side, spacing=1.0):
    xs = np.arange(side) * spacing
    verts = np.array([[x, y] for y in xs for x in xs])
    tris = []
    for j in range(side - 1):
        for i in range(side - 1):
            v = j * side + i
            tris.append((v, v + 1, v + side + 1))
            tris.append((v, v + side + 1, v + side))
    return Triangulation.from_data(VertexSet.from_points(verts), tris)


def test_vertex_set_snaps_to_dyadics():
    vs = VertexSet.from_points([(0.1, 0.2), (0.3, 0.4)])
    for row, ints in zip(vs.coords, vs.ints):
        for c, i in zip(row, ints):
            assert c == i / float(1 << vs.scale_exp)


def test_vertex_set_rejects_bad_input():
    with pytest.raises(MeshError):
        VertexSet.from_points(np.zeros((0, 2)))
    with pytest.raises(MeshError):
        VertexSet.from_points([(math.nan, 0.0)])


def test_from_data_validates_elements():
    vs = VertexSet.from_points([(0.0, 0.0), (1.0, 0.0), (0.0, 1.0)])
    with pytest.raises(MeshError):
        Triangulation.from_data(vs, [(0, 1)])
    with pytest.raises(MeshError):
        Triangulation.from_data(vs, [(0, 1, 3)])
    with pytest.raises(MeshError):
        Triangulation.from_data(vs, [(0, 1, 1)])


def test_from_data_rejects_degenerate_element():
    vs = VertexSet.from_points([(0.0, 0.0), (1.0, 0.0), (2.0, 0.0)])
    with pytest.raises(MeshError):
        Triangulation.from_data(vs, [(0, 1, 2)])


def test_face_classification():
    tri = unit_square_mesh()
    interior = tri.interior_faces()
    assert len(interior) == 1
    assert interior[0][0] == (0, 3)
    assert len(tri.boundary_faces()) == 4


def test_too_many_incident_elements_rejected():
    verts = [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (1.0, 1.0), (0.5, -1.0)]
    with pytest.raises(MeshError):
        Triangulation.from_data(
            VertexSet.from_points(verts), [(0, 1, 2), (0, 1, 3), (0, 1, 4)]
        )


def test_element_volume_exact():
    tri = unit_square_mesh()
    assert tri.element_volume(0) == Fraction(1, 2)
    assert tri.element_volume(1) == Fraction(1, 2)


def test_covering_certificate_unit_square():
    tri = unit_square_mesh()
    total, hull = covering_certificate(tri)
    assert total == hull == Fraction(1)


def test_check_delaunay_flags_violation():
    # skinny pair: the far vertex of one triangle sits inside the other's
    # circumdisc
    verts = [(0.0, 0.0), (1.0, 0.0), (0.5, 0.05), (0.5, -0.05)]
    tri = Triangulation.from_data(
        VertexSet.from_points(verts), [(0, 1, 2), (0, 1, 3)]
    )
    ok, violations = check_delaunay(tri)
    assert not ok and violations


def test_check_delaunay_accepts_lattice():
    tri = lattice_mesh(4)
    ok, violations = check_delaunay(tri)
    assert ok and not violations


def test_nondegeneracy_constant_lattice():
    # unit right triangles: diam^2 / vol = (sqrt(2))^2 / (1/2) = 4
    c = check_nondegenerate(lattice_mesh(3))
    assert c == pytest.approx(4.0, rel=1e-12)


def test_check_uniform_lattice():
    tri = lattice_mesh(5)
    cmin, ccov, eps = check_uniform(tri.vertices, 1.0, ((0.0, 0.0), (4.0, 4.0)))
    assert cmin == pytest.approx(1.0)
    # the covering radius of a unit lattice over its own bbox is sqrt(2)/2
    assert ccov == pytest.approx(math.sqrt(2.0) / 2.0, rel=1e-6)


def test_audit_mesh_bundle():
    tri = lattice_mesh(4)
    audit = audit_mesh(tri, 1.0, ((0.0, 0.0), (3.0, 3.0)))
    assert audit.delaunay_ok
    assert audit.worst_insphere_violation == 0.0
    assert audit.c_bar >= 1.0
    assert math.isfinite(audit.nondegeneracy_c)


def test_mesh_json_round_trip_bit_exact():
    tri = lattice_mesh(3, spacing=0.1)
    obj = mesh_to_json(tri)
    text = json.dumps(obj)
    back = mesh_from_json(json.loads(text))
    assert mesh_to_json(back) == obj
    assert np.array_equal(back.vertices.coords, tri.vertices.coords)
    assert back.elements == tri.elements


@settings(deadline=None, max_examples=25)
@given(st.integers(2, 5), st.integers(0, 10**6))
def test_lattice_meshes_always_audit_clean(side, salt):
    rng = np.random.default_rng(salt)
    spacing = float(rng.uniform(0.25, 2.0))
    tri = lattice_mesh(side, spacing)
    ok, violations = check_delaunay(tri)
    assert ok and not violations
    total, hull = covering_certificate(tri)
    assert total == hull
