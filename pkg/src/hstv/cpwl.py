"""Piecewise affine functions on triangulations and their Hessian variation.

A CPWL function is determined by one value per mesh vertex.  Its second
distributional derivative is a measure supported on the interior codim-1
faces; each face carries the rank-1 matrix (jump of gradient) x (normal),
whose Schatten p-norm equals the Euclidean norm of the gradient jump for
every p.  The total over a box is therefore

    htv = sum over interior faces F of  H^{d-1}(F clipped to the box) * |dG|_2

independent of p.  Gradients are solved exactly per element over rationals;
clipping is exact: segment parameter clipping in d=2, half-space polygon
clipping in d=3.  Faces lying inside a boundary plane of the box contribute
zero (the box is treated as open) and trigger a warning.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .mesh import MeshError, Triangulation, VertexSet
from .schatten import PExponent

__all__ = [
    "CpwlFunction",
    "HtvBreakdown",
    "interpolate",
    "evaluate",
    "element_gradient",
    "element_gradient_exact",
    "htv",
    "pyramid_fixture",
    "twin_pyramid_fixture",
    "pyramid_fan_mesh",
    "BoundaryFaceWarning",
]


class BoundaryFaceWarning(UserWarning):
    """A mesh face lies inside a boundary plane of the measurement box."""


@dataclass(frozen=True)
class CpwlFunction:
    """Continuous piecewise affine function: mesh plus one value per vertex."""

    mesh: Triangulation
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != (len(self.mesh.vertices),):
            raise MeshError("need exactly one value per vertex")
        if not np.all(np.isfinite(vals)):
            raise MeshError("vertex values must be finite")
        object.__setattr__(self, "values", vals)


@dataclass(frozen=True)
class HtvBreakdown:
    """Total Hessian variation and the per-face (face, measure, jump) terms."""

    total: float
    per_face: tuple[tuple[tuple[int, ...], float, float], ...]


def interpolate(mesh: Triangulation, w) -> CpwlFunction:
    """Vertex interpolant of a scalar function handle."""
    vals = np.array([float(w(x)) for x in mesh.vertices.coords])
    return CpwlFunction(mesh=mesh, values=vals)


def _vertex_fractions(mesh: Triangulation):
    cache = getattr(mesh, "_vfrac_cache", None)
    if cache is None:
        den = 1 << mesh.vertices.scale_exp
        cache = [tuple(Fraction(i, den) for i in row) for row in mesh.vertices.ints]
        object.__setattr__(mesh, "_vfrac_cache", cache)
    return cache


def element_gradient_exact(f: CpwlFunction, element_id: int) -> tuple[Fraction, ...]:
    """Constant gradient of f on one element, solved exactly over rationals."""
    mesh = f.mesh
    e = mesh.elements[element_id]
    pts = _vertex_fractions(mesh)
    d = mesh.dim
    rows = [[pts[e[i]][k] - pts[e[0]][k] for k in range(d)] for i in range(1, d + 1)]
    rhs = [Fraction(float(f.values[e[i]])) - Fraction(float(f.values[e[0]])) for i in range(1, d + 1)]
    sol = _solve_exact(rows, rhs)
    if sol is None:
        raise MeshError(f"element {e} is degenerate")
    return tuple(sol)


def element_gradient(f: CpwlFunction, element_id: int) -> np.ndarray:
    return np.array([float(c) for c in element_gradient_exact(f, element_id)])


def _solve_exact(rows, rhs):
    n = len(rows)
    m = [list(r) + [b] for r, b in zip(rows, rhs)]
    for col in range(n):
        piv = next((r for r in range(col, n) if m[r][col] != 0), None)
        if piv is None:
            return None
        m[col], m[piv] = m[piv], m[col]
        pv = m[col][col]
        m[col] = [x / pv for x in m[col]]
        for r in range(n):
            if r != col and m[r][col] != 0:
                fac = m[r][col]
                m[r] = [a - fac * b for a, b in zip(m[r], m[col])]
    return [m[r][-1] for r in range(n)]


def evaluate(f: CpwlFunction, points) -> np.ndarray:
    """Exact evaluation by element location and affine reconstruction."""
    mesh = f.mesh
    pts = _vertex_fractions(mesh)
    d = mesh.dim
    out = np.empty(len(points))
    for qi, qraw in enumerate(np.atleast_2d(np.asarray(points, dtype=float))):
        q = tuple(Fraction(float(c)) for c in qraw)
        hit = None
        for ei, e in enumerate(mesh.elements):
            if _bary_inside(pts, e, q, d):
                hit = ei
                break
        if hit is None:
            raise MeshError(f"point {qraw.tolist()} outside the triangulated region")
        e = mesh.elements[hit]
        lam = _bary_coords(pts, e, q, d)
        out[qi] = float(sum(l * Fraction(float(f.values[v])) for l, v in zip(lam, e)))
    return out


def _bary_coords(pts, e, q, d):
    rows = [[pts[e[i]][k] for i in range(d + 1)] for k in range(d)]
    rows.append([Fraction(1)] * (d + 1))
    rhs = list(q) + [Fraction(1)]
    sol = _solve_exact(rows, rhs)
    if sol is None:
        raise MeshError("degenerate element in evaluation")
    return sol


def _bary_inside(pts, e, q, d):
    lam = _bary_coords(pts, e, q, d)
    return all(l >= 0 for l in lam)


def _clip_segment_measure(a, b, lo, hi) -> tuple[Fraction, bool]:
    """(clip fraction of |ab| inside the box, lies-in-boundary-plane flag)."""
    d = len(a)
    for k in range(d):
        for wall in (lo[k], hi[k]):
            if a[k] == wall and b[k] == wall:
                return Fraction(0), True
    t0, t1 = Fraction(0), Fraction(1)
    for k in range(d):
        p = b[k] - a[k]
        if p == 0:
            if a[k] < lo[k] or a[k] > hi[k]:
                return Fraction(0), False
            continue
        ta = (lo[k] - a[k]) / p
        tb = (hi[k] - a[k]) / p
        if ta > tb:
            ta, tb = tb, ta
        t0 = max(t0, ta)
        t1 = min(t1, tb)
    return (max(t1 - t0, Fraction(0)), False)


def _clip_polygon(poly, lo, hi):
    """Sutherland-Hodgman against the box's half-spaces, exact."""
    d = len(lo)
    for k in range(d):
        for wall, keep_ge in ((lo[k], True), (hi[k], False)):
            if not poly:
                return []
            out = []
            m = len(poly)
            for i in range(m):
                cur, nxt = poly[i], poly[(i + 1) % m]
                cin = (cur[k] >= wall) if keep_ge else (cur[k] <= wall)
                nin = (nxt[k] >= wall) if keep_ge else (nxt[k] <= wall)
                if cin:
                    out.append(cur)
                if cin != nin:
                    t = (wall - cur[k]) / (nxt[k] - cur[k])
                    out.append(tuple(c + t * (n - c) for c, n in zip(cur, nxt)))
            poly = out
    return poly


def _polygon_area3(poly) -> float:
    if len(poly) < 3:
        return 0.0
    p0 = np.array([float(c) for c in poly[0]])
    acc = np.zeros(3)
    for i in range(1, len(poly) - 1):
        u = np.array([float(c) for c in poly[i]]) - p0
        v = np.array([float(c) for c in poly[i + 1]]) - p0
        acc += np.cross(u, v)
    return 0.5 * float(np.linalg.norm(acc))


def htv(f: CpwlFunction, box, p: PExponent | float = 2.0) -> HtvBreakdown:
    """Hessian variation of f over an open axis-aligned box.

    The box must lie inside the triangulated region.  Per-face terms with an
    exactly zero gradient jump are omitted; faces inside a boundary plane of
    the box contribute nothing and raise BoundaryFaceWarning.
    """
    if not isinstance(p, PExponent):
        p = PExponent(float(p))
    mesh = f.mesh
    d = mesh.dim
    if d not in (2, 3):
        raise MeshError("box clipping implemented for d in {2, 3}")
    lo = tuple(Fraction(float(c)) for c in box[0])
    hi = tuple(Fraction(float(c)) for c in box[1])
    if any(a >= b for a, b in zip(lo, hi)):
        raise MeshError("box must have positive extent")
    pts = _vertex_fractions(mesh)
    _require_box_in_hull(mesh, pts, lo, hi)

    grads = {}

    def grad(ei):
        if ei not in grads:
            grads[ei] = element_gradient_exact(f, ei)
        return grads[ei]

    per_face = []
    total = 0.0
    for face, (e1, e2) in sorted(mesh.interior_faces()):
        dg = [a - b for a, b in zip(grad(e1), grad(e2))]
        if all(c == 0 for c in dg):
            continue
        fpts = [pts[i] for i in face]
        if d == 2:
            frac, on_wall = _clip_segment_measure(fpts[0], fpts[1], lo, hi)
            seg = [float(a - b) for a, b in zip(fpts[0], fpts[1])]
            measure = float(frac) * math.hypot(*seg)
        else:
            on_wall = any(
                all(fp[k] == wall for fp in fpts) for k in range(d) for wall in (lo[k], hi[k])
            )
            measure = 0.0 if on_wall else _polygon_area3(_clip_polygon(fpts, lo, hi))
        if on_wall:
            warnings.warn(
                f"face {face} lies inside a boundary plane of the box; it carries "
                "Hessian mass that an open box does not see",
                BoundaryFaceWarning,
                stacklevel=2,
            )
            continue
        if measure <= 0.0:
            continue
        jump = math.sqrt(float(sum(c * c for c in dg)))
        per_face.append((face, measure, jump))
        total += measure * jump
    return HtvBreakdown(total=total, per_face=tuple(per_face))


def _require_box_in_hull(mesh, pts, lo, hi):
    d = mesh.dim
    corners = [[]]
    for k in range(d):
        corners = [c + [w] for c in corners for w in (lo[k], hi[k])]
    for corner in corners:
        q = tuple(corner)
        if not any(_bary_inside(pts, e, q, d) for e in mesh.elements):
            raise MeshError(f"box corner {[float(c) for c in corner]} outside the mesh")


def pyramid_fan_mesh() -> Triangulation:
    """9-vertex fan mesh of the unit sup-norm pyramid's support square."""
    verts = [
        (0.0, 0.0),
        (1.0, 0.0), (0.0, 1.0), (-1.0, 0.0), (0.0, -1.0),
        (1.0, 1.0), (-1.0, 1.0), (-1.0, -1.0), (1.0, -1.0),
    ]
    tris = [
        (0, 1, 5), (0, 5, 2), (0, 2, 6), (0, 6, 3),
        (0, 3, 7), (0, 7, 4), (0, 4, 8), (0, 8, 1),
    ]
    return Triangulation.from_data(VertexSet.from_points(verts), tris)


def pyramid_fixture() -> CpwlFunction:
    """max(1 - |x|_inf, 0) on its fan mesh wrapped in a flat apron ring.

    The apron makes the support-boundary creases interior faces, so the full
    Hessian mass (16) is visible to htv over any box containing the support.
    """
    inner = [
        (0.0, 0.0),
        (1.0, 1.0), (0.0, 1.0), (-1.0, 1.0), (-1.0, 0.0),
        (-1.0, -1.0), (0.0, -1.0), (1.0, -1.0), (1.0, 0.0),
    ]
    outer = [(2.0, 2.0), (-2.0, 2.0), (-2.0, -2.0), (2.0, -2.0)]
    verts = inner + outer
    O1, O2, O3, O4 = 9, 10, 11, 12
    tris = [
        (0, 8, 1), (0, 1, 2), (0, 2, 3), (0, 3, 4),
        (0, 4, 5), (0, 5, 6), (0, 6, 7), (0, 7, 8),
        (O1, O2, 3), (O1, 3, 2), (O1, 2, 1),
        (O3, O4, 7), (O3, 7, 6), (O3, 6, 5),
        (7, O4, O1), (7, O1, 8), (8, O1, 1),
        (3, O2, O3), (3, O3, 4), (4, O3, 5),
    ]
    mesh = Triangulation.from_data(VertexSet.from_points(verts), tris)
    return interpolate(mesh, lambda x: max(1.0 - max(abs(x[0]), abs(x[1])), 0.0))


def twin_pyramid_fixture(h: float) -> CpwlFunction:
    """Two unit pyramids at (+-(1+h), 0) glued across a depth-h moat.

    For 0 <= h < 1/4 the function is max of the two shifted pyramids and of
    |x2|-1 and |x1|-2-h (zero on the rectangle boundary, negative inside)
    restricted to [-2-h, 2+h] x [-1, 1], zero outside.  Values: 1 at the two
    apexes, -h at (0, +-(1-h)).  Its Hessian variation is 32 + 8h, tending to
    the glued-supports value 32 as h -> 0.  At h = 0 the moat degenerates and
    the function is the plain sum of the two pyramids.
    """
    if not 0.0 <= h < 0.25:
        raise MeshError("moat depth h must lie in [0, 1/4)")
    a = 2.0 + h

    def g(x):
        if abs(x[0]) > a or abs(x[1]) > 1.0:
            return 0.0
        return max(
            1.0 - max(abs(x[0] - (1.0 + h)), abs(x[1])),
            1.0 - max(abs(x[0] + (1.0 + h)), abs(x[1])),
            max(abs(x[0]) - a, abs(x[1]) - 1.0),
        )

    cp, cm = (1.0 + h, 0.0), (-1.0 - h, 0.0)
    if h == 0.0:
        core_verts = [cp, cm, (a, 1.0), (a, -1.0), (-a, 1.0), (-a, -1.0), (0.0, 1.0), (0.0, -1.0)]
        CP, CM, NE, SE, NW, SW, T, B = range(8)
        core_tris = [
            (CP, NE, SE), (CP, T, NE), (CP, B, SE), (CP, T, B),
            (CM, NW, SW), (CM, T, NW), (CM, B, SW), (CM, T, B),
        ]
        top = [NE, T, NW]  # left-to-right order reversed below as needed
        bottom = [SE, B, SW]
        left = [NW, SW]
        right = [NE, SE]
    else:
        core_verts = [
            cp, cm,
            (a, 1.0), (a, -1.0), (-a, 1.0), (-a, -1.0),
            (h, 1.0), (-h, 1.0), (h, -1.0), (-h, -1.0),
            (0.0, 1.0 - h), (0.0, h - 1.0),
        ]
        CP, CM, NE, SE, NW, SW, TR, TL, BR, BL, VT, VB = range(12)
        core_tris = [
            (CP, NE, SE), (CP, TR, NE), (CP, BR, SE),
            (CP, TR, VT), (CP, VT, VB), (CP, VB, BR),
            (CM, NW, SW), (CM, TL, NW), (CM, BL, SW),
            (CM, TL, VT), (CM, VT, VB), (CM, VB, BL),
            (TL, TR, VT), (BL, BR, VB),
        ]
        top = [NE, TR, TL, NW]
        bottom = [SE, BR, BL, SW]
        left = [NW, SW]
        right = [NE, SE]
    n0 = len(core_verts)
    outer = [(a + 1.0, 2.0), (-a - 1.0, 2.0), (-a - 1.0, -2.0), (a + 1.0, -2.0)]
    O1, O2, O3, O4 = n0, n0 + 1, n0 + 2, n0 + 3
    verts = core_verts + outer
    tris = list(core_tris)
    chain = [O1] + top + [O2]  # fan the top strip from O1
    for i in range(1, len(chain) - 1):
        tris.append((O1, chain[i], chain[i + 1]))
    chain = [O3] + list(reversed(bottom)) + [O4]
    for i in range(1, len(chain) - 1):
        tris.append((O3, chain[i], chain[i + 1]))
    tris.append((right[1], O4, O1))
    tris.append((right[1], O1, right[0]))
    tris.append((left[0], O2, O3))
    tris.append((left[0], O3, left[1]))
    mesh = Triangulation.from_data(VertexSet.from_points(verts), tris)
    return interpolate(mesh, g)
