import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hstv.delaunay import affine_rank, convex_envelope_cpwl, delaunay_triangulate
from hstv.mesh import (
    MeshError,
    VertexSet,
    check_delaunay,
    covering_certificate,
)


def test_affine_rank():
    assert affine_rank([(0, 0)]) == 0
    assert affine_rank([(0, 0), (2, 0), (7, 0)]) == 1
    assert affine_rank([(0, 0), (1, 0), (0, 1)]) == 2
    assert affine_rank([(0, 0, 0), (1, 0, 0), (0, 1, 0), (0, 0, 1)]) == 3


def test_needs_full_dimensional_input():
    with pytest.raises(MeshError):
        delaunay_triangulate(VertexSet.from_points([(0.0, 0.0), (1.0, 1.0)]))
    with pytest.raises(MeshError):
        delaunay_triangulate(
            VertexSet.from_points([(0.0, 0.0), (1.0, 1.0), (2.0, 2.0)])
        )


def test_unit_square_tie_break_frozen():
    # all four corners are cospherical; the symbolic perturbation always
    # picks the same diagonal
    vs = VertexSet.from_points([(0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (1.0, 1.0)])
    tri = delaunay_triangulate(vs)
    assert tri.elements == ((0, 1, 2), (1, 2, 3))


def test_determinism_on_shuffled_input_order():
    rng = np.random.default_rng(11)
    pts = rng.uniform(0.0, 1.0, size=(60, 2))
    ref = delaunay_triangulate(VertexSet.from_points(pts)).elements
    again = delaunay_triangulate(VertexSet.from_points(pts)).elements
    assert ref == again


def test_certified_output_2d():
    rng = np.random.default_rng(5)
    pts = rng.normal(size=(120, 2))
    tri = delaunay_triangulate(VertexSet.from_points(pts))
    ok, violations = check_delaunay(tri)
    assert ok and not violations
    total, hull = covering_certificate(tri)
    assert total == hull


def test_certified_output_3d():
    rng = np.random.default_rng(6)
    pts = rng.uniform(size=(40, 3))
    tri = delaunay_triangulate(VertexSet.from_points(pts))
    ok, violations = check_delaunay(tri)
    assert ok and not violations
    total, hull = covering_certificate(tri)
    assert total == hull


def test_cocircular_grid_2d():
    # a 3x3 integer grid is full of cocircular quadruples; the result must
    # still certify exactly
    pts = [(x, y) for x in range(3) for y in range(3)]
    tri = delaunay_triangulate(VertexSet.from_points(pts))
    ok, _ = check_delaunay(tri)
    assert ok
    total, hull = covering_certificate(tri)
    assert total == hull == Fraction(4)


def test_envelope_affine_data_single_cell():
    vs = VertexSet.from_points([(0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (1.0, 1.0)])
    cells = convex_envelope_cpwl(vs, [0.0, 1.0, 1.0, 2.0])
    assert len(cells) == 1
    assert cells[0].vertices == (0, 1, 2, 3)
    assert cells[0].coeffs == (Fraction(1), Fraction(1))
    assert cells[0].offset == 0


def test_envelope_square_with_center_fan():
    pts = [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (1.0, 1.0), (0.5, 0.5)]
    vals = [x * x + y * y for x, y in pts]
    cells = convex_envelope_cpwl(VertexSet.from_points(pts), vals)
    assert len(cells) == 4
    assert all(4 in c.vertices for c in cells)
    for c in cells:
        for vi in c.vertices:
            assert c.value(pts[vi]) == pytest.approx(vals[vi], abs=1e-12)


def test_envelope_ignores_points_above():
    # a lifted point above the envelope must appear in no cell
    pts = [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (1.0, 1.0), (0.5, 0.5)]
    vals = [0.0, 0.0, 0.0, 0.0, 5.0]
    cells = convex_envelope_cpwl(VertexSet.from_points(pts), vals)
    assert len(cells) == 1
    assert 4 not in cells[0].vertices


def test_envelope_minorizes_data():
    rng = np.random.default_rng(9)
    pts = rng.uniform(size=(12, 2))
    vals = rng.normal(size=12)
    cells = convex_envelope_cpwl(VertexSet.from_points(pts), vals)
    vs = VertexSet.from_points(pts)
    for c in cells:
        for x, v in zip(vs.coords, vals):
            assert c.value(x) <= v + 1e-9


@settings(deadline=None, max_examples=20)
@given(st.integers(0, 10**6), st.integers(6, 40))
def test_random_sets_always_certify(salt, n):
    rng = np.random.default_rng(salt)
    pts = rng.uniform(-1.0, 1.0, size=(n, 2))
    tri = delaunay_triangulate(VertexSet.from_points(pts))
    ok, violations = check_delaunay(tri)
    assert ok and not violations
    total, hull = covering_certificate(tri)
    assert total == hull
