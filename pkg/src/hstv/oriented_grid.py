"""Orientation-adapted vertex sets: a background lattice with rotated patches.

Each patch cell (or rectangular block of adjacent cells sharing one rotation)
carves a hole out of the background lattice eps*Z^d and fills it with the
rotated lattice eps*R*Z^d, glued through a thin shell of hand-placed vertices:

- outer box Qout (the hole in the background), inner box Qin (rotated
  lattice), intermediate box Qmid halfway between, with per-axis side counts
  M_i = floor(extent_i / eps) - 2;
- anchor points on the boundary of Qmid at pitch eps/d, anchored at the low
  corner of Qmid;
- one shell vertex per anchor, picked inside B_{eps/(4d)}(anchor) to stay
  clear of every hyperplane spanned by d nearby vertices that does not mix
  inner-lattice and outer-lattice points (the margin condition); the realized
  worst margins are recorded in the audit.

The construction is deterministic: candidates come from a fixed
low-discrepancy sequence and the selected vertex maximizes the worst margin.
All structural claims (Delaunay, uniformity, non-degeneracy, per-cell
orientation set-equality on shrunken cells) are certified a posteriori.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field as dc_field
from itertools import combinations

import numpy as np
from scipy.spatial import cKDTree

from .delaunay import delaunay_triangulate
from .mesh import (
    MeshError,
    Triangulation,
    VertexSet,
    check_delaunay,
    check_nondegenerate,
    check_uniform,
)
from .radial import unit_ball_volume

__all__ = [
    "OrientationField",
    "GridParams",
    "GridAudit",
    "BlockAudit",
    "default_grid_constant",
    "boundary_layer_vertices",
    "oriented_vertices",
    "oriented_triangulation",
    "orientation_audit",
]


def default_grid_constant(d: int) -> float:
    """Default grid constant C_G = 8 + 2d.

    This caps the audited uniformity ratio c_bar and sets the minimum cell
    size delta >= C_G * eps; the audits certify the actual mesh quality, so
    the default is a feasibility constant, not a proof constant.
    """
    return float(8 + 2 * d)


@dataclass(frozen=True)
class OrientationField:
    """Rotation assignment on a delta-lattice of cell centers.

    cells maps integer cell indices k (cell center z = delta * k) to rotation
    matrices in SO(d), validated to 1e-12.
    """

    delta: float
    cells: dict

    def __post_init__(self):
        if self.delta <= 0:
            raise MeshError("delta must be positive")
        if not self.cells:
            raise MeshError("orientation field needs at least one cell")
        for k, r in self.cells.items():
            rm = np.asarray(r, dtype=float)
            d = len(k)
            if rm.shape != (d, d):
                raise MeshError(f"cell {k}: rotation shape {rm.shape} does not match index")
            if np.max(np.abs(rm.T @ rm - np.eye(d))) > 1e-12:
                raise MeshError(f"cell {k}: matrix is not orthogonal")
            if abs(np.linalg.det(rm) - 1.0) > 1e-12:
                raise MeshError(f"cell {k}: determinant is not +1")

    @property
    def dim(self) -> int:
        for k in self.cells:
            return len(k)
        raise MeshError("empty orientation field")

    def center(self, k) -> np.ndarray:
        return self.delta * np.asarray(k, dtype=float)

    @staticmethod
    def from_json(obj) -> "OrientationField":
        if isinstance(obj, str):
            obj = json.loads(obj)
        delta = float(obj["delta"])
        cells = {}
        for entry in obj["cells"]:
            z = np.asarray(entry["z"], dtype=float)
            k = tuple(int(round(c / delta)) for c in z)
            if np.max(np.abs(np.asarray(k, dtype=float) * delta - z)) > 1e-9 * delta:
                raise MeshError(f"cell center {z.tolist()} is not on the delta-lattice")
            cells[k] = np.asarray(entry["R"], dtype=float)
        return OrientationField(delta=delta, cells=cells)

    def to_json(self) -> dict:
        return {
            "delta": self.delta,
            "cells": [
                {
                    "z": (self.delta * np.asarray(k, dtype=float)).tolist(),
                    "R": np.asarray(r, dtype=float).tolist(),
                }
                for k, r in sorted(self.cells.items())
            ],
        }


@dataclass(frozen=True)
class GridParams:
    """Mesh pitch eps, cell size delta, working box, and the grid constant.

    delta must be at least c_grid * eps and every patch must span at least
    6 + 2d lattice steps; both are enforced when a grid is assembled.
    """

    eps: float
    delta: float
    box: tuple
    c_grid: float | None = None

    def __post_init__(self):
        if self.eps <= 0 or self.delta <= 0:
            raise MeshError("eps and delta must be positive")

    def resolve_c_grid(self, d: int) -> float:
        c = self.c_grid if self.c_grid is not None else default_grid_constant(d)
        if self.delta < c * self.eps - 1e-12 * self.eps:
            raise MeshError(f"delta={self.delta} is below C_G*eps={c * self.eps}")
        return c

    def m_side(self, length: float, d: int) -> int:
        """Outer-box side count along one axis: floor(length/eps) - 2."""
        m = int(math.floor(length / self.eps + 1e-9)) - 2
        if m < 6 + 2 * d:
            raise MeshError(f"patch extent {length}: M={m} below the minimum {6 + 2 * d}")
        return m


@dataclass(frozen=True)
class BlockAudit:
    cells: tuple
    n_mid: int
    min_margin_over_eps: float
    gamma_floor: float
    gamma_certified: float


@dataclass(frozen=True)
class GridAudit:
    eps: float
    delaunay_ok: bool
    nondegeneracy_c: float
    c_bar: float
    uniformity: tuple
    orientation_per_cell: tuple
    blocks: tuple = dc_field(default=())

    def to_json(self) -> dict:
        return {
            "eps": self.eps,
            "delaunay_ok": self.delaunay_ok,
            "nondegeneracy_c": self.nondegeneracy_c,
            "c_bar": self.c_bar,
            "uniformity": list(self.uniformity),
            "orientation_per_cell": [[list(k), bool(v)] for k, v in self.orientation_per_cell],
            "blocks": [
                {
                    "cells": [list(c) for c in b.cells],
                    "n_mid": b.n_mid,
                    "min_margin_over_eps": b.min_margin_over_eps,
                    "gamma_floor": b.gamma_floor,
                    "gamma_certified": b.gamma_certified,
                }
                for b in self.blocks
            ],
        }


def _halton(n: int, d: int) -> np.ndarray:
    primes = (2, 3, 5, 7, 11, 13, 17)[:d]
    out = np.empty((n, d))
    for j, base in enumerate(primes):
        col = np.zeros(n)
        f = 1.0
        num = np.arange(1, n + 1)
        while np.any(num > 0):
            f /= base
            col += f * (num % base)
            num //= base
        out[:, j] = col
    return out


def _ball_candidates(center: np.ndarray, radius: float, n: int = 256) -> np.ndarray:
    """Deterministic low-discrepancy points in the open ball around center.

    The first candidate is the center itself; it is used verbatim when no
    face constrains the choice.
    """
    d = len(center)
    got = [np.zeros(d)]
    total = 4 * n
    while len(got) < n:
        h = 2.0 * _halton(total, d) - 1.0
        keep = np.sum(h * h, axis=1) < 1.0
        got = [np.zeros(d)] + list(h[keep])
        total *= 2
    pts = np.asarray(got[:n])
    return center + 0.995 * radius * pts


_COMBOS: dict = {}


def _combo_table(n: int, d: int) -> np.ndarray:
    key = (n, d)
    if key not in _COMBOS:
        _COMBOS[key] = np.asarray(list(combinations(range(n), d)), dtype=int).reshape(-1, d)
    return _COMBOS[key]


def _face_normals(pts: np.ndarray, faces: np.ndarray, d: int):
    """Unit normals and offsets of the hyperplanes through point d-tuples."""
    a = pts[faces[:, 0]]
    if d == 2:
        t = pts[faces[:, 1]] - a
        nrm = np.stack([-t[:, 1], t[:, 0]], axis=1)
    elif d == 3:
        u = pts[faces[:, 1]] - a
        v = pts[faces[:, 2]] - a
        nrm = np.cross(u, v)
    else:
        raise MeshError("shell margins are implemented for d in {2, 3}")
    ln = np.linalg.norm(nrm, axis=1)
    good = ln > 1e-12
    nrm = nrm[good] / ln[good, None]
    return nrm, np.sum(nrm * a[good], axis=1)


def _mid_shell(center, m_vec, eps: float, placed: np.ndarray, labels: np.ndarray):
    """Pick the shell vertices for one block.

    placed holds every vertex already present; labels mark them 0 (this
    block's inner lattice) or 1 (everything else).  A candidate's score is
    its smallest distance to any hyperplane spanned by d nearby vertices
    whose labels do not mix 0 and 1 (previously placed shell vertices, label
    2, may appear on either side).
    """
    d = len(center)
    mid_half = (np.asarray(m_vec, dtype=float) - 1.0) * eps / 2.0
    anchor = np.asarray(center, dtype=float) - mid_half
    steps = [(m - 1) * d for m in m_vec]
    axes = [np.arange(0, s + 1) for s in steps]
    grid = np.meshgrid(*axes, indexing="ij")
    t = np.stack([g.ravel() for g in grid], axis=1)
    on_boundary = np.zeros(len(t), dtype=bool)
    for a in range(d):
        on_boundary |= (t[:, a] == 0) | (t[:, a] == steps[a])
    t = t[on_boundary]
    t = t[np.lexsort(t.T[::-1])]
    anchors = anchor + (eps / d) * t

    r_sel = eps / (4.0 * d)
    r_score = (3.0 if d == 2 else 2.0) * eps
    cap = 80 if d == 2 else 20
    omega = unit_ball_volume(d)
    tree = cKDTree(placed)
    mids = np.empty((len(anchors), d), dtype=float)
    n_mid = 0
    worst_margin = math.inf
    worst_floor = math.inf
    worst_cert = math.inf

    for u in anchors:
        near = sorted(tree.query_ball_point(u, r_score))
        pts_loc = [placed[near]]
        lab_loc = [labels[near]]
        if n_mid:
            marr = mids[:n_mid]
            sel = np.linalg.norm(marr - u, axis=1) <= r_score
            if sel.any():
                pts_loc.append(marr[sel])
                lab_loc.append(np.full(int(sel.sum()), 2, dtype=np.int8))
        pts_loc = np.vstack(pts_loc)
        lab_loc = np.concatenate(lab_loc)
        if len(pts_loc) > cap:
            order = np.argsort(np.linalg.norm(pts_loc - u, axis=1), kind="stable")[:cap]
            pts_loc = pts_loc[order]
            lab_loc = lab_loc[order]

        combos = _combo_table(len(pts_loc), d)
        if len(combos):
            li = lab_loc[combos]
            mix = (li == 0).any(axis=1) & (li == 1).any(axis=1)
            combos = combos[~mix]
        if len(combos) == 0:
            mids[n_mid] = u
            n_mid += 1
            continue
        nrm, offs = _face_normals(pts_loc, combos, d)
        if len(nrm) == 0:
            mids[n_mid] = u
            n_mid += 1
            continue
        k_faces = len(nrm)
        # A face whose plane lies farther than du_min + 2*r_sel from the
        # anchor can never attain the minimum for any candidate in the
        # selection ball, so dropping it leaves every candidate's score (and
        # the argmax) unchanged.
        du = np.abs(u @ nrm.T - offs)
        du_min = float(du.min())
        keep_f = du <= du_min + 2.0 * r_sel
        nrm = nrm[keep_f]
        offs = offs[keep_f]
        cands = _ball_candidates(u, r_sel)
        scores = np.abs(cands @ nrm.T - offs[None, :]).min(axis=1)
        best = int(np.argmax(scores))
        score = float(scores[best]) / eps
        gamma0 = omega * 2.0 ** (d - 2) / (2.0 * 4.0**d * d * k_faces)
        gamma = gamma0
        halvings = 0
        while score < gamma and halvings < 8:
            gamma *= 0.5
            halvings += 1
        if score < gamma:
            raise MeshError(
                f"no shell vertex with margin >= {gamma:.3e}*eps near {np.asarray(u).tolist()}"
            )
        mids[n_mid] = cands[best]
        n_mid += 1
        worst_margin = min(worst_margin, score)
        worst_floor = min(worst_floor, gamma0 / 256.0)
        worst_cert = min(worst_cert, gamma)

    info = {
        "n_mid": n_mid,
        "min_margin_over_eps": worst_margin if math.isfinite(worst_margin) else 0.0,
        "gamma_floor": worst_floor if math.isfinite(worst_floor) else 0.0,
        "gamma_certified": worst_cert if math.isfinite(worst_cert) else 0.0,
    }
    return mids[:n_mid].copy(), info


def _background_lattice(eps: float, lo, hi) -> np.ndarray:
    axes = []
    for a in range(len(lo)):
        k0 = int(math.ceil(lo[a] / eps - 1e-9))
        k1 = int(math.floor(hi[a] / eps + 1e-9))
        axes.append(np.arange(k0, k1 + 1))
    grid = np.meshgrid(*axes, indexing="ij")
    k = np.stack([g.ravel() for g in grid], axis=1)
    return eps * k.astype(float)


def _rotated_lattice_in_rect(reps: np.ndarray, eps: float, center, half) -> np.ndarray:
    """eps*R*Z^d points inside the closed rectangle center +- half."""
    center = np.asarray(center, dtype=float)
    half = np.asarray(half, dtype=float)
    rad = float(np.linalg.norm(half)) + eps
    u = reps.T @ center / eps
    axes = [
        np.arange(int(math.floor(c - rad / eps)) - 1, int(math.ceil(c + rad / eps)) + 2)
        for c in u
    ]
    grid = np.meshgrid(*axes, indexing="ij")
    k = np.stack([g.ravel() for g in grid], axis=1)
    pts = (reps @ (eps * k.astype(float).T)).T
    keep = np.all(np.abs(pts - center) <= half, axis=1)
    return pts[keep]


def _merge_blocks(field: OrientationField, active: set) -> list:
    """Greedy maximal rectangles of adjacent cells with identical rotation."""
    remaining = set(active)
    blocks = []
    d = field.dim

    def same(a, b):
        return np.max(np.abs(np.asarray(field.cells[a], float) - np.asarray(field.cells[b], float))) <= 1e-12

    for k in sorted(active):
        if k not in remaining:
            continue
        lo = list(k)
        hi = list(k)
        for axis in range(d):
            while True:
                nxt = hi[axis] + 1
                ranges = [range(lo[a], hi[a] + 1) if a != axis else (nxt,) for a in range(d)]
                probe = [tuple(p) for p in np.stack(np.meshgrid(*ranges, indexing="ij"), axis=-1).reshape(-1, d)]
                if all(c in remaining and same(c, k) for c in probe):
                    hi[axis] = nxt
                else:
                    break
        ranges = [range(lo[a], hi[a] + 1) for a in range(d)]
        cells = [tuple(int(x) for x in p) for p in np.stack(np.meshgrid(*ranges, indexing="ij"), axis=-1).reshape(-1, d)]
        remaining.difference_update(cells)
        blocks.append((tuple(sorted(cells)), np.asarray(field.cells[k], dtype=float)))
    return blocks


def _assemble(field: OrientationField, params: GridParams):
    d = field.dim
    params.resolve_c_grid(d)
    lo = np.asarray(params.box[0], dtype=float)
    hi = np.asarray(params.box[1], dtype=float)
    if len(lo) != d or len(hi) != d or np.any(hi - lo <= 0):
        raise MeshError("working box must match the field dimension and have positive extent")
    eps = params.eps
    delta = params.delta

    # Cells fully inside the box with a non-identity rotation get patches;
    # identity cells and partially covered cells keep the background lattice.
    active = set()
    for k, r in field.cells.items():
        z = field.center(k)
        if np.all(z - delta / 2 >= lo - 1e-9 * eps) and np.all(z + delta / 2 <= hi + 1e-9 * eps):
            if np.max(np.abs(np.asarray(r, float) - np.eye(d))) > 1e-12:
                active.add(tuple(int(c) for c in k))

    background = _background_lattice(eps, lo, hi)
    keep = np.ones(len(background), dtype=bool)
    blocks = _merge_blocks(field, active)

    geoms = []
    for cells, reps in blocks:
        arr = np.asarray(cells, dtype=float)
        center = delta * (arr.min(axis=0) + arr.max(axis=0)) / 2.0
        extent = delta * (arr.max(axis=0) - arr.min(axis=0) + 1.0)
        m_vec = [params.m_side(extent[a], d) for a in range(d)]
        out_half = np.array([m * eps / 2.0 for m in m_vec])
        in_half = np.array([(m - 2) * eps / 2.0 for m in m_vec])
        geoms.append((cells, reps, center, m_vec, out_half, in_half))
        inside = np.all(np.abs(background - center) <= out_half + 1e-9 * eps, axis=1)
        keep &= ~inside

    # Pass 1: background with holes plus every block's inner lattice, so the
    # shell selection for each block sees its neighbors.
    segments = [(background[keep], -1)]
    for bid, (cells, reps, center, m_vec, out_half, in_half) in enumerate(geoms):
        segments.append((_rotated_lattice_in_rect(reps, eps, center, in_half + 1e-9 * eps), bid))

    # Pass 2: shells, one block at a time in deterministic order.
    audits = []
    for bid, (cells, reps, center, m_vec, out_half, in_half) in enumerate(geoms):
        placed = np.vstack([s for s, _ in segments])
        labels = np.concatenate(
            [np.full(len(s), 0 if owner == bid else 1, dtype=np.int8) for s, owner in segments]
        )
        mids, info = _mid_shell(center, m_vec, eps, placed, labels)
        segments.append((mids, -2))
        audits.append(BlockAudit(cells=cells, **info))

    allpts = np.vstack([s for s, _ in segments])
    order = np.lexsort(allpts.T[::-1])
    return allpts[order], audits


def boundary_layer_vertices(z, params: GridParams, rotation) -> VertexSet:
    """Vertex set gluing one rotated patch at cell center z into the lattice.

    z must lie on the delta-lattice; the working box must contain the cell.
    """
    z = np.asarray(z, dtype=float)
    k = tuple(int(round(c / params.delta)) for c in z)
    if np.max(np.abs(np.asarray(k, dtype=float) * params.delta - z)) > 1e-9 * params.delta:
        raise MeshError("patch center must lie on the delta-lattice")
    field = OrientationField(delta=params.delta, cells={k: np.asarray(rotation, dtype=float)})
    pts, _ = _assemble(field, params)
    return VertexSet.from_points(pts)


def oriented_vertices(field: OrientationField, params: GridParams) -> VertexSet:
    pts, _ = _assemble(field, params)
    return VertexSet.from_points(pts)


def orientation_audit(vs: VertexSet, field: OrientationField, params: GridParams) -> tuple:
    """Per-cell set equality of the vertices and the rotated lattice.

    Compares on the cell cube shrunk to side delta - C_G*eps, then by a
    further 1e-9*eps so exact boundary ties land on the same side for both
    sets.  Cells not fully inside the working box are skipped.
    """
    d = vs.dim
    c_grid = params.resolve_c_grid(d)
    eps = params.eps
    side = params.delta - c_grid * eps
    pts = vs.coords
    lo = np.asarray(params.box[0], dtype=float)
    hi = np.asarray(params.box[1], dtype=float)
    results = []
    for k in sorted(field.cells):
        z = field.center(k)
        inside_box = np.all(z - params.delta / 2 >= lo - 1e-9 * eps) and np.all(
            z + params.delta / 2 <= hi + 1e-9 * eps
        )
        if not inside_box:
            continue
        half = side / 2.0 - 1e-9 * eps
        if half <= 0:
            # delta == C_G*eps: the comparison cube is empty and the
            # equality holds vacuously.
            results.append((tuple(k), True))
            continue
        inside = pts[np.all(np.abs(pts - z) <= half, axis=1)]
        lattice = _rotated_lattice_in_rect(
            np.asarray(field.cells[k], dtype=float), eps, z, np.full(d, half)
        )
        ok = len(inside) == len(lattice)
        if ok and len(inside):
            dist, _ = cKDTree(lattice).query(inside, k=1)
            ok = bool(np.max(dist) <= 1e-12)
        results.append((tuple(k), ok))
    return tuple(results)


def oriented_triangulation(
    field: OrientationField,
    params: GridParams,
    c_star_cap: float | None = None,
) -> tuple[Triangulation, GridAudit]:
    """Delaunay triangulation of the adapted vertex set, plus its audit.

    Raises when an audit misses its cap: an empty-ball violation, c_bar above
    the grid constant, c_star above the explicit cap (when given), or a
    failed per-cell orientation equality.
    """
    pts, block_audits = _assemble(field, params)
    vs = VertexSet.from_points(pts)
    d = vs.dim
    c_grid = params.resolve_c_grid(d)
    tri = delaunay_triangulate(vs)
    ok, violations = check_delaunay(tri)
    if not ok:
        raise MeshError(f"adapted grid lost the empty-ball property: {violations[:3]}")
    c_star = check_nondegenerate(tri)
    uni = check_uniform(vs, params.eps, params.box)
    c_bar = max(uni[0], uni[1])
    orient = orientation_audit(vs, field, params)
    audit = GridAudit(
        eps=params.eps,
        delaunay_ok=ok,
        nondegeneracy_c=c_star,
        c_bar=c_bar,
        uniformity=uni,
        orientation_per_cell=orient,
        blocks=tuple(block_audits),
    )
    if c_bar > c_grid:
        raise MeshError(f"uniformity audit failed: c_bar={c_bar} above C_G={c_grid}")
    if c_star_cap is not None and c_star > c_star_cap:
        raise MeshError(f"nondegeneracy audit failed: c_star={c_star} above cap={c_star_cap}")
    bad = [k for k, flag in orient if not flag]
    if bad:
        raise MeshError(f"orientation equality failed for cells {bad}")
    return tri, audit
