"""Delaunay triangulation via the lifted paraboloid with index perturbation.

Points are lifted to heights |x|^2 + rho^phi(x) for an infinitesimal rho > 0,
phi(x) = insertion index + 2.  The lower convex envelope of the lifted points
projects to a genuine triangulation for every distinct point set: cospherical
ties are broken by the sign of the lowest-order nonvanishing rho-coefficient
of the in-sphere determinant, evaluated exactly over integers.

Construction is incremental (Bowyer-Watson) inside a far integer enclosing
simplex that is stripped afterwards.  The result is certified exactly: empty
circumballs, face compatibility, and hull coverage by rational volume sums.
On certification failure the enclosing simplex is regrown and the build rerun.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .mesh import MeshError, Triangulation, VertexSet, check_delaunay, covering_certificate
from .predicates import det_int, orient_int, sos_inside

__all__ = ["delaunay_triangulate", "convex_envelope_cpwl", "EnvelopeCell", "affine_rank"]

_GHOST_FACTORS = (1 << 20, 1 << 30, 1 << 40)


def affine_rank(ints) -> int:
    """Exact affine rank of integer points (dimension of their affine span)."""
    if len(ints) <= 1:
        return 0
    base = ints[0]
    rows = [[Fraction(p[k] - base[k]) for k in range(len(base))] for p in ints[1:]]
    rank = 0
    ncols = len(base)
    for col in range(ncols):
        pivot = next((r for r in range(rank, len(rows)) if rows[r][col] != 0), None)
        if pivot is None:
            continue
        rows[rank], rows[pivot] = rows[pivot], rows[rank]
        prow = rows[rank]
        for r in range(rank + 1, len(rows)):
            if rows[r][col] != 0:
                factor = rows[r][col] / prow[col]
                rows[r] = [a - factor * b for a, b in zip(rows[r], prow)]
        rank += 1
        if rank == ncols:
            break
    return rank


def _ghost_simplex(ints, factor: int):
    """Integer enclosing simplex far outside the data's bounding box."""
    d = len(ints[0])
    lo = [min(p[k] for p in ints) for k in range(d)]
    hi = [max(p[k] for p in ints) for k in range(d)]
    center = [(lo[k] + hi[k]) // 2 for k in range(d)]
    spread = max(1, max(hi[k] - lo[k] for k in range(d)))
    big = factor * spread * (d + 1)
    ghosts = [tuple(center[k] - big for k in range(d))]
    for j in range(d):
        ghosts.append(tuple(center[k] - big + (big * (d + 1) if k == j else 0) for k in range(d)))
    return ghosts


def _solve_small(a: np.ndarray, b: np.ndarray):
    """Cramer solve for the tiny linear systems of circumcenter fits."""
    if len(b) == 2:
        det = a[0, 0] * a[1, 1] - a[0, 1] * a[1, 0]
        if det == 0.0 or not math.isfinite(det):
            return None
        return np.array([
            (b[0] * a[1, 1] - a[0, 1] * b[1]) / det,
            (a[0, 0] * b[1] - b[0] * a[1, 0]) / det,
        ])
    if len(b) == 3:
        c0 = a[1, 1] * a[2, 2] - a[1, 2] * a[2, 1]
        c1 = a[1, 2] * a[2, 0] - a[1, 0] * a[2, 2]
        c2 = a[1, 0] * a[2, 1] - a[1, 1] * a[2, 0]
        det = a[0, 0] * c0 + a[0, 1] * c1 + a[0, 2] * c2
        if det == 0.0 or not math.isfinite(det):
            return None
        x0 = b[0] * c0 + a[0, 1] * (a[1, 2] * b[2] - b[1] * a[2, 2]) + a[0, 2] * (b[1] * a[2, 1] - a[1, 1] * b[2])
        x1 = a[0, 0] * (b[1] * a[2, 2] - a[1, 2] * b[2]) + b[0] * c1 + a[0, 2] * (a[1, 0] * b[2] - b[1] * a[2, 0])
        x2 = a[0, 0] * (a[1, 1] * b[2] - b[1] * a[2, 1]) + a[0, 1] * (b[1] * a[2, 0] - a[1, 0] * b[2]) + b[0] * c2
        return np.array([x0 / det, x1 / det, x2 / det])
    try:
        return np.linalg.solve(a, b)
    except np.linalg.LinAlgError:
        return None


def _build_once(ints, factor: int):
    """One Bowyer-Watson pass; returns element index tuples (reals only).

    The bad set per insertion is found by a scan over live elements with a
    vectorized circumball prefilter: an element is skipped without an exact
    test only when its float circumball (validated by an equidistance
    residual) puts the point clearly outside.  Ghost-adjacent or suspect
    elements always get the exact perturbed in-sphere test.
    """
    d = len(ints[0])
    n = len(ints)
    ghosts = _ghost_simplex(ints, factor)
    pts = list(ints) + ghosts
    # Insertion order: a fixed-seed shuffle avoids the cavity blowup of
    # structured inputs (lattice rows are collinear) while keeping the build
    # deterministic.  Perturbation ranks follow the insertion order.
    if n <= 32:
        order = list(range(n))
    else:
        order = [int(i) for i in np.random.default_rng(0x9E3779B1).permutation(n)]
    phi = [0] * n + list(range(n + 2, n + d + 3))
    for j, i in enumerate(order):
        phi[i] = 2 + j
    coords = np.asarray(pts, dtype=float)
    real = coords[:n]
    spread_f = max(1e-300, float(np.max(real.max(axis=0) - real.min(axis=0))))
    # Band constant: covers float rounding of the ball fit plus the float
    # representation error of far-away ghost coordinates at this factor.
    kband = max(1e-6, 4e-15 * factor)

    # Append-only slot arrays; slots go dead when their element is carved out.
    # Each slot stores the circumball as (v0, e = center - v0): the signed
    # verdict value for a query q is F = |q-v0|^2 - 2 e.(q-v0) = d^2 - r^2,
    # which stays float-stable even when the center is far away (ghosts).
    # fband is the per-slot ambiguity band on F; inf forces the exact test.
    cap = 64
    slot_tup: list[tuple[int, ...] | None] = [None] * cap
    slot_sign = [0] * cap
    v0f = np.zeros((cap, d))
    evec = np.zeros((cap, d))
    fband = np.full(cap, np.inf)
    alive = np.zeros(cap, dtype=bool)
    nslots = 0
    by_tup: dict[tuple[int, ...], int] = {}

    def add_element(e):
        nonlocal cap, nslots, v0f, evec, fband, alive, slot_tup, slot_sign
        tup = tuple(sorted(e))
        osign = orient_int([pts[i] for i in tup])
        if osign == 0:
            raise ArithmeticError("flat element produced; predicates inconsistent")
        if nslots == cap:
            cap *= 2
            v0f = np.vstack([v0f, np.zeros((cap - nslots, d))])
            evec = np.vstack([evec, np.zeros((cap - nslots, d))])
            fband = np.concatenate([fband, np.full(cap - nslots, np.inf)])
            alive = np.concatenate([alive, np.zeros(cap - nslots, dtype=bool)])
            slot_tup.extend([None] * (cap - nslots))
            slot_sign.extend([0] * (cap - nslots))
        s = nslots
        nslots += 1
        slot_tup[s] = tup
        slot_sign[s] = osign
        alive[s] = True
        by_tup[tup] = s
        fband[s] = np.inf
        evec[s] = 0.0
        if tup[0] >= n:
            return  # all-ghost element: exact test only (exists pre-insertion)
        p0 = coords[tup[0]]
        others = coords[list(tup[1:])]
        a = 2.0 * (others - p0)
        b = np.sum((others - p0) ** 2, axis=1)
        c = _solve_small(a, b)
        if c is None or not np.all(np.isfinite(c)):
            return
        resid = np.abs(a @ c - b)
        tol = 1e-7 * np.maximum(np.abs(b), np.sum(np.abs(a), axis=1) * np.max(np.abs(c), initial=1e-300))
        if np.any(resid > tol):
            return
        v0f[s] = p0
        evec[s] = c
        enorm = float(np.linalg.norm(c))
        fband[s] = kband * (spread_f**2 + enorm * spread_f)

    add_element(range(n, n + d + 1))

    for qi in order:
        q = pts[qi]
        qf = coords[qi]
        if nslots > 4096 and int(alive[:nslots].sum()) * 2 < nslots:
            live_idx = np.flatnonzero(alive[:nslots])
            keepn = len(live_idx)
            slot_tup[:keepn] = [slot_tup[s] for s in live_idx]
            slot_sign[:keepn] = [slot_sign[s] for s in live_idx]
            v0f[:keepn] = v0f[live_idx]
            evec[:keepn] = evec[live_idx]
            fband[:keepn] = fband[live_idx]
            alive[:] = False
            alive[:keepn] = True
            by_tup = {slot_tup[s]: s for s in range(keepn)}
            nslots = keepn
        live = np.flatnonzero(alive[:nslots])
        w = qf - v0f[live]
        fval = np.sum(w * w, axis=1) - 2.0 * np.sum(evec[live] * w, axis=1)
        fb = fband[live]
        clear = fval < -fb
        band = ~clear & ~(fval > fb)
        bad = [slot_tup[s] for s in live[clear]]
        for s in live[band]:
            tup = slot_tup[s]
            simplex = [pts[i] for i in tup]
            if sos_inside(simplex, [phi[i] for i in tup], q, phi[qi], slot_sign[s]):
                bad.append(tup)
        if not bad:
            raise ArithmeticError("insertion point outside every circumball")
        face_count: dict[tuple[int, ...], int] = {}
        for tup in bad:
            for skip in range(d + 1):
                f = tup[:skip] + tup[skip + 1 :]
                face_count[f] = face_count.get(f, 0) + 1
        for tup in bad:
            alive[by_tup.pop(tup)] = False
        for f, cnt in face_count.items():
            if cnt == 1:
                add_element(f + (qi,))

    return sorted(tup for tup in by_tup if all(i < n for i in tup))


def delaunay_triangulate(vs: VertexSet) -> Triangulation:
    """Delaunay triangulation of a vertex set, exact and deterministic.

    Requires d+1 affinely independent points.  The output is certified before
    being returned: zero in-sphere violations, face-compatible, and element
    volumes summing exactly to the hull volume with hull-supporting boundary
    faces.  A failed certificate regrows the enclosing simplex and retries.
    """
    d = vs.dim
    if len(vs) < d + 1 or affine_rank(vs.ints) < d:
        raise MeshError("need at least d+1 affinely independent points")
    last_err: Exception | None = None
    for factor in _GHOST_FACTORS:
        try:
            elems = _build_once(vs.ints, factor)
            tri = Triangulation.from_data(vs, elems)
            ok, violations = check_delaunay(tri)
            if not ok:
                raise ArithmeticError(f"in-sphere violations after build: {violations[:5]}")
            total, cone = covering_certificate(tri, check_hull_faces=True)
            if total != cone:
                raise ArithmeticError(f"covering mismatch: elements {total} vs hull {cone}")
            return tri
        except (ArithmeticError, MeshError) as err:  # regrow and retry
            last_err = err
    raise ArithmeticError(f"triangulation failed at all enclosing scales: {last_err}")


@dataclass(frozen=True)
class EnvelopeCell:
    """One affine piece of a lower convex envelope: e(x) = coeffs . x + offset."""

    vertices: tuple[int, ...]
    coeffs: tuple[Fraction, ...]
    offset: Fraction

    def value(self, x) -> float:
        return float(sum(float(c) * float(xi) for c, xi in zip(self.coeffs, x)) + self.offset)


def convex_envelope_cpwl(vs: VertexSet, values) -> list[EnvelopeCell]:
    """Cells of the lower convex envelope of vertex data (x_v, f_v).

    Enumerates affinely independent (d+1)-subsets, keeps the interpolating
    affine maps that minorize f on all vertices, and merges subsets sharing
    one supporting map into maximal cells.  Exact over rationals; unperturbed,
    so cospherical flats stay single cells.  Intended for small vertex sets;
    guards against combinatorial blowup.
    """
    d = vs.dim
    n = len(vs)
    if n < d + 1:
        raise MeshError("need at least d+1 points")
    vals = [Fraction(float(v)) for v in np.asarray(values, dtype=float)]
    if len(vals) != n:
        raise MeshError("one value per vertex required")
    if math.comb(n, d + 1) * n > 5_000_000:
        raise MeshError("vertex set too large for envelope enumeration")
    pts = [tuple(Fraction(c) for c in row) for row in vs.ints]
    scale = Fraction(1, 1 << vs.scale_exp)
    pts = [tuple(c * scale for c in p) for p in pts]

    from itertools import combinations

    supports: dict[tuple, set[int]] = {}
    for subset in combinations(range(n), d + 1):
        plane = _interpolating_plane([pts[i] for i in subset], [vals[i] for i in subset])
        if plane is None:
            continue
        key = plane
        if key in supports:
            continue
        coeffs, offset = plane[:-1], plane[-1]
        ok = True
        touching = set()
        for j in range(n):
            h = sum(c * x for c, x in zip(coeffs, pts[j])) + offset
            if h > vals[j]:
                ok = False
                break
            if h == vals[j]:
                touching.add(j)
        if ok:
            supports[key] = touching
    cells = []
    for key, touching in sorted(supports.items(), key=lambda kv: tuple(sorted(kv[1]))):
        members = tuple(sorted(touching))
        if affine_rank([vs.ints[i] for i in members]) < d:
            continue
        cells.append(EnvelopeCell(vertices=members, coeffs=tuple(key[:-1]), offset=key[-1]))
    seen = {}
    for cell in cells:
        seen.setdefault(cell.vertices, cell)
    return list(seen.values())


def _interpolating_plane(points, values):
    """Affine map through (d+1) lifted points, or None if base-degenerate.
    Returned as a normalized tuple (a_1..a_d, b) of Fractions."""
    d = len(points[0])
    rows = []
    rhs = []
    for p, v in zip(points, values):
        rows.append(list(p) + [Fraction(1)])
        rhs.append(v)
    sol = _solve_fraction(rows, rhs)
    if sol is None:
        return None
    return tuple(sol)


def _solve_fraction(rows, rhs):
    m = [list(r) + [b] for r, b in zip(rows, rhs)]
    size = len(m)
    ncol = len(m[0]) - 1
    if size != ncol:
        return None
    for col in range(ncol):
        pivot = next((r for r in range(col, size) if m[r][col] != 0), None)
        if pivot is None:
            return None
        m[col], m[pivot] = m[pivot], m[col]
        pv = m[col][col]
        m[col] = [x / pv for x in m[col]]
        for r in range(size):
            if r != col and m[r][col] != 0:
                f = m[r][col]
                m[r] = [a - f * b for a, b in zip(m[r], m[col])]
    return [m[r][-1] for r in range(size)]
