"""Measurement fitting over piecewise-linear functions on a fixed 2d mesh.

The regularizer is the mesh Hessian variation Sum_e len(e) * |jump_e(u)|,
linear-programmable because the gradient jump across an interior edge is a
linear functional of the vertex values; an l1 data term (or hard equality
constraints at lambda = infinity) completes the LP.  bump_cost solves the
compactly supported unit-bump problem whose value thresholds the fidelity
weight, and lambda_threshold_experiment verifies the plateau behavior.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .mesh import MeshError, Triangulation, VertexSet
from .simplex import simplex_solve

__all__ = [
    "FitProblem",
    "FitSolution",
    "LambdaSweep",
    "SweepRow",
    "bump_cost",
    "bump_solution",
    "edge_jump_system",
    "fan_disc_mesh",
    "lambda_threshold_experiment",
    "mesh_total_variation",
    "solve",
]

_VAR_CAP = 20000


@dataclass(frozen=True)
class FitProblem:
    """l1 fit of vertex-snapped data with Hessian-variation regularization.

    lam may be math.inf (hard interpolation: equality constraints instead of
    a fidelity term).  pins force vertex values before the solve; pinned
    vertices must not carry data sites.  q is fixed to 1 (the l1 fidelity is
    what makes the problem an LP); p is accepted but does not change the
    objective on piecewise-linear functions.
    """

    mesh: Triangulation
    sites: tuple
    targets: tuple
    lam: float
    p: float = 1.0
    q: float = 1.0
    pins: tuple = field(default_factory=tuple)

    def __post_init__(self):
        if self.mesh.dim != 2:
            raise MeshError("fitting is implemented for d = 2 meshes")
        sites = tuple(int(s) for s in self.sites)
        targets = tuple(float(t) for t in self.targets)
        if len(sites) != len(set(sites)):
            raise MeshError("data sites must be distinct vertices")
        if len(sites) != len(targets):
            raise MeshError("need one target per site")
        n = len(self.mesh.vertices)
        if any(s < 0 or s >= n for s in sites):
            raise MeshError("site index out of range")
        if float(self.q) != 1.0:
            raise MeshError("only q = 1 fidelity is supported")
        if not (self.lam >= 0.0):
            raise MeshError("lambda must be nonnegative (math.inf allowed)")
        pins = tuple((int(v), float(val)) for v, val in self.pins)
        pinned = {v for v, _ in pins}
        if len(pinned) != len(pins):
            raise MeshError("duplicate pinned vertex")
        if any(v < 0 or v >= n for v in pinned):
            raise MeshError("pinned vertex out of range")
        if pinned & set(sites):
            raise MeshError("a data site cannot be pinned")
        object.__setattr__(self, "sites", sites)
        object.__setattr__(self, "targets", targets)
        object.__setattr__(self, "pins", pins)
        object.__setattr__(self, "lam", float(self.lam))


@dataclass(frozen=True)
class FitSolution:
    """Vertex values with the objective split and the LP certificate."""

    values: np.ndarray
    objective: float
    htv_part: float
    fidelity_part: float
    certificate: float
    iterations: int


def _hat_gradients(mesh: Triangulation) -> np.ndarray:
    """(m, 3, 2) gradient of each element's three hat functions."""
    pts = mesh.vertices.coords
    els = np.asarray(mesh.elements, dtype=np.intp)
    p = pts[els]
    t = np.stack([p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]], axis=2)
    tinv = np.linalg.inv(t)
    g1 = tinv[:, 0, :]
    g2 = tinv[:, 1, :]
    return np.stack([-(g1 + g2), g1, g2], axis=1)


def edge_jump_system(mesh: Triangulation, zero_boundary=()):
    """(edges, lengths, rows): gradient-jump functionals of the vertex values.

    rows[k] @ values is the jump of the normal derivative across edge k and
    lengths[k] is the edge length, so sum(lengths * abs(rows @ values)) is
    the Hessian variation.  Interior edges are always present.  A mesh
    boundary edge is included only when both its endpoints belong to
    zero_boundary (vertices whose value is pinned to zero): the interpolant
    then vanishes along the edge, its extension by zero beyond the mesh is
    continuous, and the edge is priced as a crease against that extension
    (outside gradient zero).  Other boundary edges carry no term, so without
    pins affine functions cost nothing.
    """
    pts = mesh.vertices.coords
    els = np.asarray(mesh.elements, dtype=np.intp)
    grads = _hat_gradients(mesh)
    centroids = pts[els].mean(axis=1)
    zb = frozenset(int(v) for v in zero_boundary)
    interior = sorted(mesh.interior_faces())
    rim = [
        (f, (e,))
        for f, e in sorted(mesh.boundary_faces())
        if f[0] in zb and f[1] in zb
    ]
    n = len(mesh.vertices)
    if (len(interior) + len(rim)) * n > 2e8:
        raise MeshError("mesh too large for the dense fit assembly")
    rows = np.zeros((len(interior) + len(rim), n))
    lengths = np.empty(len(rows))
    edges = []
    for k, (f, inc) in enumerate(interior + rim):
        va, vb = pts[f[0]], pts[f[1]]
        tangent = vb - va
        ln = float(np.hypot(tangent[0], tangent[1]))
        normal = np.array([-tangent[1], tangent[0]]) / ln
        if len(inc) == 2 and normal @ (centroids[inc[1]] - centroids[inc[0]]) < 0.0:
            normal = -normal
        for local, v in enumerate(els[inc[0]]):
            rows[k, v] += normal @ grads[inc[0], local]
        if len(inc) == 2:
            for local, v in enumerate(els[inc[1]]):
                rows[k, v] -= normal @ grads[inc[1], local]
        lengths[k] = ln
        edges.append(f)
    return edges, lengths, rows


def mesh_total_variation(mesh: Triangulation, values, zero_boundary=()) -> float:
    """Hessian variation of the vertex interpolant over the whole mesh."""
    _, lengths, rows = edge_jump_system(mesh, zero_boundary)
    return float(lengths @ np.abs(rows @ np.asarray(values, dtype=float)))


def solve(prob: FitProblem) -> FitSolution:
    """Minimize the Hessian variation plus lam * l1 data misfit via an LP.

    Boundary edges between two zero-pinned vertices are priced against the
    zero extension (see edge_jump_system), so pinning the whole boundary to
    zero poses the compact-support problem on the mesh itself.
    """
    mesh = prob.mesh
    n = len(mesh.vertices)
    pinned = dict(prob.pins)
    zb = frozenset(v for v, val in prob.pins if val == 0.0)
    _, lengths, rows = edge_jump_system(mesh, zb)
    m = len(lengths)
    free = [v for v in range(n) if v not in pinned]
    fidx = {v: i for i, v in enumerate(free)}
    nf = len(free)
    pin_vec = np.zeros(n)
    for v, val in pinned.items():
        pin_vec[v] = val
    const = rows @ pin_vec
    rows_f = rows[:, free]

    hard = math.isinf(prob.lam)
    ns = 0 if (hard or prob.lam == 0.0) else len(prob.sites)
    nvar = 2 * nf + 2 * m + 2 * ns
    if nvar > _VAR_CAP:
        raise MeshError(f"{nvar} LP variables exceeds the {_VAR_CAP} cap")

    # Variables [u+, u-, t+, t-, s+, s-], all >= 0; each jump and each
    # misfit is split into its positive and negative part by an equality
    # row, so the t/s columns are unit columns and the solver can start
    # from a feasible basis without a phase-1 run.
    nrow = m + (len(prob.sites) if hard else ns)
    a = np.zeros((nrow, nvar))
    b = np.zeros(nrow)
    is_eq = np.ones(nrow, dtype=bool)
    c = np.zeros(nvar)
    c[2 * nf : 2 * nf + m] = lengths
    c[2 * nf + m : 2 * nf + 2 * m] = lengths
    if ns:
        c[2 * nf + 2 * m :] = prob.lam

    a[:m, :nf] = rows_f
    a[:m, nf : 2 * nf] = -rows_f
    for k in range(m):
        a[k, 2 * nf + k] = -1.0
        a[k, 2 * nf + m + k] = 1.0
    b[:m] = -const

    if hard or ns:
        for i, (s, y) in enumerate(zip(prob.sites, prob.targets)):
            r = m + i
            a[r, fidx[s]] = 1.0
            a[r, nf + fidx[s]] = -1.0
            if not hard:
                a[r, 2 * nf + 2 * m + i] = -1.0
                a[r, 2 * nf + 2 * m + ns + i] = 1.0
            b[r] = y
    lp = simplex_solve(c, a, b, is_eq)

    values = pin_vec.copy()
    values[free] = lp.x[:nf] - lp.x[nf : 2 * nf]
    htv_part = float(lengths @ np.abs(rows @ values))
    fidelity = float(
        sum(abs(values[s] - y) for s, y in zip(prob.sites, prob.targets))
    )
    if hard:
        objective = htv_part
    else:
        objective = htv_part + prob.lam * fidelity
    cert = max(lp.certificate, abs(objective - lp.objective) / (1.0 + abs(objective)))
    if cert > 1e-7:
        raise ArithmeticError(f"optimality certificate {cert:.3e} exceeds 1e-7")
    return FitSolution(
        values=values,
        objective=objective,
        htv_part=htv_part,
        fidelity_part=fidelity,
        certificate=cert,
        iterations=lp.iterations,
    )


def fan_disc_mesh(k: int, radius: float = 1.0, outer: float = 2.0) -> Triangulation:
    """k-sector disc fan with a flat annulus out to radius outer.

    Vertex 0 is the center; 1..k the inner ring (radius), k+1..2k the outer
    ring.  The annulus makes the inner-ring crease interior.
    """
    if k < 3:
        raise MeshError("need at least 3 sectors")
    ang = 2.0 * math.pi * np.arange(k) / k
    inner = np.stack([radius * np.cos(ang), radius * np.sin(ang)], axis=1)
    outer_pts = np.stack([outer * np.cos(ang), outer * np.sin(ang)], axis=1)
    verts = np.vstack([[[0.0, 0.0]], inner, outer_pts])
    tris = []
    for j in range(k):
        jn = (j + 1) % k
        tris.append((0, 1 + j, 1 + jn))
        tris.append((1 + j, 1 + k + j, 1 + k + jn))
        tris.append((1 + j, 1 + k + jn, 1 + jn))
    return Triangulation.from_data(VertexSet.from_points(verts), tris)


def _pin_outside(mesh: Triangulation, center: np.ndarray, radius: float, base=()):
    """Zero pins for every vertex at distance >= radius (1e-12 collar).

    base pins are kept; a nonzero base pin outside the ball contradicts the
    compact support and raises.  All mesh-boundary vertices must end up
    pinned, otherwise the support could spill past the rim unpriced.
    """
    pts = mesh.vertices.coords
    dist = np.linalg.norm(pts - center, axis=1)
    pins = dict(base)
    for v in np.flatnonzero(dist >= radius - 1e-12):
        if pins.get(int(v), 0.0) != 0.0:
            raise MeshError("existing pin conflicts with the bump support")
        pins[int(v)] = 0.0
    boundary = {v for f, _ in mesh.boundary_faces() for v in f}
    if not boundary <= set(pins):
        raise MeshError("support ball reaches the mesh boundary")
    return tuple(sorted(pins.items()))


def bump_solution(
    mesh: Triangulation, site: int, radius: float, pins=()
) -> FitSolution:
    """Cheapest unit bump at a vertex with support inside the given ball."""
    center = mesh.vertices.coords[site]
    merged = _pin_outside(mesh, center, radius, pins)
    prob = FitProblem(
        mesh=mesh, sites=(site,), targets=(1.0,), lam=math.inf, pins=merged
    )
    return solve(prob)


def bump_cost(mesh: Triangulation, site: int, radius: float) -> float:
    return bump_solution(mesh, site, radius).objective


@dataclass(frozen=True)
class SweepRow:
    lam: float
    objective: float
    htv_part: float
    fidelity_part: float


@dataclass(frozen=True)
class LambdaSweep:
    """Lambda sweep rows plus the threshold diagnostics.

    lambda_star is the largest single-site bump cost; monotone_ok is
    objective monotonicity along the sweep, plateau_ok agreement with the
    hard-interpolation objective for lam >= lambda_star, modification_ok the
    bump-correction inequality: subtracting err_i * bump_i from the
    lambda_star minimizer yields an exactly fitting function whose variation
    is at most that minimizer's objective (plus 1e-9).
    """

    rows: tuple
    lambda_star: float
    infinity_objective: float
    monotone_ok: bool
    plateau_ok: bool
    modification_ok: bool


def lambda_threshold_experiment(
    prob: FitProblem, lambdas, bump_radius: float | None = None
) -> LambdaSweep:
    """Sweep the fidelity weight and verify the bump-cost threshold."""
    mesh = prob.mesh
    pts = mesh.vertices.coords
    sites = prob.sites
    if bump_radius is None:
        seps = [
            float(np.linalg.norm(pts[a] - pts[b]))
            for i, a in enumerate(sites)
            for b in sites[i + 1 :]
        ]
        boundary = {v for f, _ in mesh.boundary_faces() for v in f}
        clearance = min(
            float(np.min(np.linalg.norm(pts[list(boundary)] - pts[s], axis=1)))
            for s in sites
        )
        bump_radius = 0.999 * min(seps + [clearance]) if seps else 0.999 * clearance

    bumps = [bump_solution(mesh, s, bump_radius, prob.pins) for s in sites]
    lambda_star = max(bp.objective for bp in bumps)

    def at(lam: float) -> FitSolution:
        return solve(
            FitProblem(
                mesh=mesh,
                sites=sites,
                targets=prob.targets,
                lam=lam,
                p=prob.p,
                q=prob.q,
                pins=prob.pins,
            )
        )

    rows = []
    for lam in lambdas:
        sol = at(float(lam))
        rows.append(
            SweepRow(
                lam=float(lam),
                objective=sol.objective,
                htv_part=sol.htv_part,
                fidelity_part=sol.fidelity_part,
            )
        )
    inf_obj = at(math.inf).objective

    ordered = sorted(rows, key=lambda r: r.lam)
    monotone_ok = all(
        b.objective >= a.objective - 1e-9 * (1.0 + abs(a.objective))
        for a, b in zip(ordered, ordered[1:])
    )
    plateau_ok = all(
        abs(r.objective - inf_obj) <= 1e-6 * (1.0 + abs(inf_obj))
        for r in rows
        if r.lam >= lambda_star - 1e-12
    )

    star = at(lambda_star)
    corrected = star.values.copy()
    for bp, s, y in zip(bumps, sites, prob.targets):
        corrected -= (star.values[s] - y) * bp.values
    fit_err = max(abs(corrected[s] - y) for s, y in zip(sites, prob.targets))
    zb = frozenset(v for v, val in prob.pins if val == 0.0)
    corrected_htv = mesh_total_variation(mesh, corrected, zb)
    modification_ok = (
        fit_err <= 1e-9 and corrected_htv <= star.objective + 1e-9
    )
    return LambdaSweep(
        rows=tuple(rows),
        lambda_star=float(lambda_star),
        infinity_objective=float(inf_obj),
        monotone_ok=bool(monotone_ok),
        plateau_ok=bool(plateau_ok),
        modification_ok=bool(modification_ok),
    )
