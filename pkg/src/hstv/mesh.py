"""Triangulation data model and regularity auditors.

A triangulation is a vertex set plus (d+1)-tuples of vertex indices whose
simplices tile a bounded region face-to-face.  Three regularity auditors
quantify mesh quality:

- Delaunay: no vertex strictly inside an element's open circumball;
- non-degeneracy: smallest c with (diam e)^d <= c * vol(e) for all e;
- uniformity: c_bar = max(eps / min pairwise distance, covering radius / eps)
  over an axis-aligned box, covering radius certified on a probe grid.

Coordinates are snapped to dyadics at ingestion so all predicates are exact
integer determinant signs.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.spatial import cKDTree

from .predicates import (
    det_int,
    insphere_sign,
    orient_int,
    simplex_volume_fraction,
    snap_scale,
    snap_value,
)

__all__ = [
    "VertexSet",
    "Triangulation",
    "MeshAudit",
    "audit_mesh",
    "check_delaunay",
    "check_nondegenerate",
    "check_uniform",
    "check_faces",
    "check_local_lattice",
    "lattice_simplex_volume_bound",
    "covering_certificate",
    "mesh_to_json",
    "mesh_from_json",
]


class MeshError(ValueError):
    """Raised for structurally invalid vertex sets or triangulations."""


@dataclass(frozen=True)
class VertexSet:
    """Distinct points in R^d with snapped dyadic coordinates.

    coords holds the snapped doubles; ints the matching scaled integers
    (coords == ints * 2^-scale_exp exactly).
    """

    coords: np.ndarray
    ints: tuple[tuple[int, ...], ...]
    scale_exp: int

    @staticmethod
    def from_points(points) -> "VertexSet":
        pts = np.asarray(points, dtype=float)
        if pts.ndim != 2 or pts.shape[0] == 0:
            raise MeshError("vertex set must be a nonempty (n, d) array")
        if not np.all(np.isfinite(pts)):
            raise MeshError("vertex coordinates must be finite")
        scale = snap_scale(float(np.max(np.abs(pts))) if pts.size else 1.0)
        ints = []
        snapped = np.empty_like(pts)
        for i, row in enumerate(pts):
            qrow = []
            for j, x in enumerate(row):
                q, s = snap_value(float(x), scale)
                qrow.append(q)
                snapped[i, j] = s
            ints.append(tuple(qrow))
        if len(set(ints)) != len(ints):
            raise MeshError("vertices coincide after dyadic snapping")
        return VertexSet(coords=snapped, ints=tuple(ints), scale_exp=scale)

    @property
    def dim(self) -> int:
        return self.coords.shape[1]

    def __len__(self) -> int:
        return self.coords.shape[0]


@dataclass(frozen=True)
class Triangulation:
    """Simplicial mesh: vertices plus positively-sized elements.

    Elements are stored as ascending index tuples, sorted lexicographically,
    so identical input always serializes identically.  The face table maps
    each codim-1 face (ascending d-tuple) to the 1 or 2 incident elements.
    """

    vertices: VertexSet
    elements: tuple[tuple[int, ...], ...]
    face_table: dict = field(repr=False)

    @staticmethod
    def from_data(vertices: VertexSet, elements) -> "Triangulation":
        d = vertices.dim
        elems = []
        for e in elements:
            tup = tuple(sorted(int(i) for i in e))
            if len(tup) != d + 1 or len(set(tup)) != d + 1:
                raise MeshError(f"element {e} is not a (d+1)-tuple of distinct indices")
            if tup[0] < 0 or tup[-1] >= len(vertices):
                raise MeshError(f"element {e} references a missing vertex")
            pts = [vertices.ints[i] for i in tup]
            if orient_int(pts) == 0:
                raise MeshError(f"element {tup} has zero volume")
            elems.append(tup)
        elems = tuple(sorted(set(elems)))
        if len(elems) != len(set(elems)):
            raise MeshError("duplicate elements")
        faces: dict[tuple[int, ...], list[int]] = {}
        for ei, e in enumerate(elems):
            for skip in range(d + 1):
                f = e[:skip] + e[skip + 1 :]
                faces.setdefault(f, []).append(ei)
        for f, inc in faces.items():
            if len(inc) > 2:
                raise MeshError(f"face {f} shared by {len(inc)} elements")
        return Triangulation(vertices=vertices, elements=elems, face_table=faces)

    @property
    def dim(self) -> int:
        return self.vertices.dim

    def interior_faces(self):
        return [(f, inc) for f, inc in self.face_table.items() if len(inc) == 2]

    def boundary_faces(self):
        return [(f, inc[0]) for f, inc in self.face_table.items() if len(inc) == 1]

    def element_volume(self, ei: int) -> Fraction:
        pts = [self.vertices.ints[i] for i in self.elements[ei]]
        return simplex_volume_fraction(pts, self.vertices.scale_exp)


@dataclass(frozen=True)
class MeshAudit:
    delaunay_ok: bool
    worst_insphere_violation: float
    nondegeneracy_c: float
    uniformity: tuple[float, float, float]  # (c_bar_min_dist, c_bar_cover, eps)

    @property
    def c_bar(self) -> float:
        return max(self.uniformity[0], self.uniformity[1])


def audit_mesh(tri: Triangulation, eps: float, box) -> MeshAudit:
    ok, worst = delaunay_audit_value(tri)
    return MeshAudit(
        delaunay_ok=ok,
        worst_insphere_violation=worst,
        nondegeneracy_c=check_nondegenerate(tri),
        uniformity=check_uniform(tri.vertices, eps, box),
    )


def _circumdata(tri: Triangulation) -> tuple[np.ndarray, np.ndarray]:
    """Float circumcenters and squared radii per element (filter only).

    Centers are NaN when the solve fails or the vertices are not equidistant
    from the solution to within a small residual; callers must then fall back
    to exact tests against every vertex.
    """
    pts = tri.vertices.coords
    els = np.asarray(tri.elements, dtype=int)
    p = pts[els]  # (nel, d+1, dim)
    a = 2.0 * (p[:, 1:, :] - p[:, :1, :])
    b = np.sum(p[:, 1:, :] ** 2, axis=2) - np.sum(p[:, :1, :] ** 2, axis=2)
    centers = np.full((len(els), tri.dim), np.nan)
    with np.errstate(all="ignore"):
        dets = np.linalg.det(a)
        good = np.isfinite(dets) & (dets != 0.0)
        if good.any():
            try:
                centers[good] = np.linalg.solve(a[good], b[good][..., None])[..., 0]
            except np.linalg.LinAlgError:
                for ei in np.flatnonzero(good):
                    try:
                        centers[ei] = np.linalg.solve(a[ei], b[ei])
                    except np.linalg.LinAlgError:
                        centers[ei] = np.nan
        dist2 = np.sum((p - centers[:, None, :]) ** 2, axis=2)
        hi = np.max(dist2, axis=1)
        lo = np.min(dist2, axis=1)
        bad = ~np.all(np.isfinite(centers), axis=1) | ~np.isfinite(hi) | (hi - lo > 1e-7 * hi)
    centers[bad] = np.nan
    return centers, hi


def check_delaunay(tri: Triangulation) -> tuple[bool, list[tuple[int, int]]]:
    """Exact empty-circumball audit.

    A violation is a vertex strictly inside an element's circumball (exact
    integer in-sphere sign; cospherical vertices are not violations).  The
    KD-tree radius prefilter is padded by 1e-6 relative, so only vertices at
    least that far outside the ball can be skipped without an exact test.
    """
    pts = tri.vertices.coords
    ints = tri.vertices.ints
    tree = cKDTree(pts)
    centers, r2 = _circumdata(tri)
    finite = np.all(np.isfinite(centers), axis=1)
    radii = np.sqrt(np.maximum(np.where(finite, r2, 0.0), 0.0)) * (1.0 + 1e-6) + 1e-12
    cands = np.empty(len(tri.elements), dtype=object)
    if finite.any():
        cands[finite] = tree.query_ball_point(centers[finite], radii[finite])
    violations: list[tuple[int, int]] = []
    for ei, e in enumerate(tri.elements):
        cand = cands[ei] if finite[ei] else range(len(pts))
        simplex = [ints[i] for i in e]
        own = set(e)
        osign = orient_int(simplex)
        for vi in sorted(cand):
            if vi in own:
                continue
            s = insphere_sign(simplex, ints[vi]) * osign
            if s > 0:
                violations.append((ei, vi))
    return len(violations) == 0, violations


def delaunay_audit_value(tri: Triangulation) -> tuple[bool, float]:
    ok, viol = check_delaunay(tri)
    if ok:
        return True, 0.0
    pts = tri.vertices.coords
    centers, r2 = _circumdata(tri)
    worst = 0.0
    for ei, vi in viol:
        if not (np.all(np.isfinite(centers[ei])) and math.isfinite(r2[ei])):
            continue
        r = math.sqrt(max(r2[ei], 1e-300))
        worst = max(worst, (r - math.dist(pts[vi], centers[ei])) / r)
    return False, worst


def check_nondegenerate(tri: Triangulation) -> float:
    """Max over elements of (diam e)^d / vol(e); volumes checked exactly."""
    pts = tri.vertices.coords
    d = tri.dim
    els = np.asarray(tri.elements, dtype=int)
    p = pts[els]
    diff = p[:, :, None, :] - p[:, None, :, :]
    diam = np.sqrt(np.max(np.sum(diff * diff, axis=3), axis=(1, 2)))
    worst = 0.0
    for ei, e in enumerate(tri.elements):
        vol = tri.element_volume(ei)
        if vol == 0:
            raise MeshError(f"element {e} degenerate")
        worst = max(worst, float(diam[ei]) ** d / float(vol))
    return worst


def check_uniform(vs: VertexSet, eps: float, box) -> tuple[float, float, float]:
    """(c_bar_min_dist, c_bar_cover, eps) over an axis-aligned box.

    Covering radius is certified on a probe grid of pitch <= eps/8 (recorded
    lower bound).  box = (lo_vec, hi_vec).
    """
    if eps <= 0.0:
        raise MeshError("eps must be positive")
    if len(vs) == 0:
        raise MeshError("empty vertex set")
    pts = vs.coords
    tree = cKDTree(pts)
    if len(vs) >= 2:
        dmin, _ = tree.query(pts, k=2)
        min_dist = float(np.min(dmin[:, 1]))
    else:
        min_dist = math.inf
    lo = np.asarray(box[0], dtype=float)
    hi = np.asarray(box[1], dtype=float)
    if np.any(hi <= lo):
        raise MeshError("box must have positive extent")
    pitch = eps / 8.0
    axes = [np.linspace(lo[k], hi[k], max(2, int(math.ceil((hi[k] - lo[k]) / pitch)) + 1)) for k in range(vs.dim)]
    mesh = np.meshgrid(*axes, indexing="ij")
    probes = np.stack([m.ravel() for m in mesh], axis=1)
    cover = 0.0
    chunk = 200_000
    for start in range(0, probes.shape[0], chunk):
        dist, _ = tree.query(probes[start : start + chunk], k=1)
        cover = max(cover, float(np.max(dist)))
    c_min = eps / min_dist if math.isfinite(min_dist) else 0.0
    return (c_min, cover / eps, eps)


def check_faces(tri: Triangulation, require_connected: bool = True) -> None:
    """Face-to-face compatibility audit; raises MeshError on violation.

    Checks: every codim-1 face shared by <= 2 elements (already enforced),
    no vertex inside the closed carrier of an element it does not span
    (catches hanging vertices), and connectedness through shared faces.
    """
    pts = tri.vertices.coords
    ints = tri.vertices.ints
    d = tri.dim
    tree = cKDTree(pts)
    for ei, e in enumerate(tri.elements):
        p = pts[list(e)]
        center = np.mean(p, axis=0)
        rad = math.sqrt(float(np.max(np.sum((p - center) ** 2, axis=1))))
        own = set(e)
        for vi in tree.query_ball_point(center, rad * (1.0 + 1e-9) + 1e-12):
            if vi in own:
                continue
            if _point_in_simplex(ints, e, ints[vi]):
                raise MeshError(f"vertex {vi} lies inside element {e} (hanging vertex)")
    if require_connected and tri.elements:
        seen = {0}
        stack = [0]
        while stack:
            cur = stack.pop()
            for skip in range(d + 1):
                f = tri.elements[cur][:skip] + tri.elements[cur][skip + 1 :]
                for nb in tri.face_table[f]:
                    if nb not in seen:
                        seen.add(nb)
                        stack.append(nb)
        if len(seen) != len(tri.elements):
            raise MeshError("mesh is not face-connected")


def _point_in_simplex(ints, element, q) -> bool:
    """Exact: q in the closed simplex spanned by element's vertices."""
    pts = [ints[i] for i in element]
    osign = orient_int(pts)
    for skip in range(len(element)):
        trial = pts[:skip] + [q] + pts[skip + 1 :]
        if orient_int(trial) * osign < 0:
            return False
    return True


def check_local_lattice(tri: Triangulation, center, radius: float, eps: float, rot) -> bool:
    """Locally-lattice structure audit around a ball.

    Precondition (verified): V agrees with the rotated lattice eps*R*Z^d
    inside B_radius(center).  Returns True iff every element meeting the
    shrunken ball B_{radius - sqrt(d) eps} has all its vertices on the corner
    set of a single lattice cell (per-coordinate index spread <= 1).
    """
    q = np.asarray(center, dtype=float)
    r = np.asarray(rot, dtype=float)
    d = tri.dim
    pts = tri.vertices.coords
    tol = 1e-9 * eps
    # precondition: vertex subset inside the ball == lattice points inside
    inside = pts[np.linalg.norm(pts - q, axis=1) <= radius]
    lattice_inside = _lattice_points_in_ball(q, radius, eps, r)
    if len(inside) != len(lattice_inside):
        raise MeshError("vertices inside the ball do not match the rotated lattice")
    if len(inside):
        dist, _ = cKDTree(lattice_inside).query(inside, k=1)
        if float(np.max(dist)) > tol:
            raise MeshError("vertices inside the ball do not match the rotated lattice")
    shrink = radius - math.sqrt(d) * eps
    for e in tri.elements:
        p = pts[list(e)]
        if np.min(np.linalg.norm(p - q, axis=1)) > shrink + tol:
            continue
        k = (r.T @ p.T).T / eps
        kr = np.round(k)
        if np.max(np.abs(k - kr)) > 1e-9:
            return False
        spread = kr.max(axis=0) - kr.min(axis=0)
        if np.any(spread > 1.0 + 1e-12):
            return False
    return True


def _lattice_points_in_ball(q, radius, eps, rot):
    d = len(q)
    u = rot.T @ q / eps
    lo = np.floor(u - radius / eps - 1).astype(int)
    hi = np.ceil(u + radius / eps + 1).astype(int)
    axes = [np.arange(lo[k], hi[k] + 1) for k in range(d)]
    grid = np.meshgrid(*axes, indexing="ij")
    ks = np.stack([g.ravel() for g in grid], axis=1)
    pts = (rot @ (eps * ks.T)).T
    keep = np.linalg.norm(pts - q, axis=1) <= radius
    return pts[keep]


def lattice_simplex_volume_bound(vectors) -> tuple[bool, float]:
    """(degenerate, volume) for d+1 integer points; volume >= 1/d! if not."""
    vecs = [tuple(int(c) for c in v) for v in vectors]
    d = len(vecs[0])
    rows = [tuple(vecs[i][k] - vecs[0][k] for k in range(d)) for i in range(1, d + 1)]
    det = det_int(rows)
    if det == 0:
        return True, 0.0
    return False, float(Fraction(abs(det), math.factorial(d)))


def covering_certificate(tri: Triangulation, check_hull_faces: bool = True) -> tuple[Fraction, Fraction]:
    """(sum of element volumes, volume enclosed by boundary faces), exact.

    Equality of the two certifies that the elements tile their boundary's
    interior with no overlaps or holes.  With check_hull_faces each boundary
    face is also verified to support the convex hull (all vertices weakly on
    one side), which upgrades the certificate to "union == conv(V)".
    """
    ints = tri.vertices.ints
    coords = tri.vertices.coords
    d = tri.dim
    total_int = 0
    for e in tri.elements:
        p0 = ints[e[0]]
        rows = [tuple(ints[i][k] - p0[k] for k in range(d)) for i in e[1:]]
        total_int += abs(det_int(rows))
    cone_int = 0
    scale = Fraction(1 << tri.vertices.scale_exp)
    max_abs = float(np.max(np.abs(coords))) if len(coords) else 1.0
    thr = 1e-12 * (1.0 + max_abs) ** d
    for f, ei in tri.boundary_faces():
        e = tri.elements[ei]
        opp = next(i for i in e if i not in f)
        fpts = [ints[i] for i in f]
        rows_from_opp = [tuple(fp[k] - ints[opp][k] for k in range(d)) for fp in fpts]
        sigma = det_int(rows_from_opp)
        sigma = (sigma > 0) - (sigma < 0)
        rows_from_origin = [tuple(fp) for fp in fpts]
        cone_int += sigma * det_int(rows_from_origin)
        if check_hull_faces:
            _certify_hull_face(tri, f, ints, coords, thr)
    fact = math.factorial(d)
    return Fraction(total_int, fact) / scale**d, Fraction(cone_int, fact) / scale**d


def _certify_hull_face(tri: Triangulation, f, ints, coords, thr: float) -> None:
    """Exact check that all vertices lie weakly on one side of face f.

    Float side values prefilter: only vertices within thr of the face plane
    (a rigorous rounding bound for these dot products) or extreme witnesses
    of a sign conflict get the exact determinant.
    """
    d = tri.dim
    base_i = ints[f[0]]
    rows = [tuple(ints[i][k] - base_i[k] for k in range(d)) for i in f[1:]]

    def exact_sign(vi: int) -> int:
        rowsv = rows + [tuple(ints[vi][k] - base_i[k] for k in range(d))]
        s = det_int(rowsv)
        return (s > 0) - (s < 0)

    base = coords[f[0]]
    if d == 2:
        t = coords[f[1]] - base
        normal = np.array([-t[1], t[0]])
    elif d == 3:
        normal = np.cross(coords[f[1]] - base, coords[f[2]] - base)
    else:
        ref = None
        for vi in range(len(ints)):
            s = exact_sign(vi)
            if s == 0:
                continue
            if ref is None:
                ref = s
            elif s != ref:
                raise MeshError(f"boundary face {f} is not hull-supporting")
        return
    dots = (coords - base) @ normal
    band = thr * max(1.0, float(np.linalg.norm(normal)))
    pos = dots > band
    neg = dots < -band
    if pos.any() and neg.any():
        # clear sign conflict (or a violated float bound): settle it exactly
        ref = None
        for vi in range(len(ints)):
            s = exact_sign(vi)
            if s == 0:
                continue
            if ref is None:
                ref = s
            elif s != ref:
                raise MeshError(f"boundary face {f} is not hull-supporting")
        return
    ref = 1 if pos.any() else (-1 if neg.any() else 0)
    for vi in np.flatnonzero(~pos & ~neg):
        s = exact_sign(int(vi))
        if s == 0:
            continue
        if ref == 0:
            ref = s
        elif s != ref:
            raise MeshError(f"boundary face {f} is not hull-supporting")


def mesh_to_json(tri: Triangulation) -> dict:
    return {
        "dim": tri.dim,
        "vertices": [[float(x) for x in row] for row in tri.vertices.coords],
        "elements": [list(e) for e in tri.elements],
    }


def mesh_from_json(obj) -> Triangulation:
    if isinstance(obj, str):
        obj = json.loads(obj)
    vs = VertexSet.from_points(obj["vertices"])
    if vs.dim != int(obj["dim"]):
        raise MeshError("dim field disagrees with vertex width")
    return Triangulation.from_data(vs, obj["elements"])
