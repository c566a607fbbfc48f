import math

import numpy as np
import pytest
from scipy.optimize import linprog

from hstv.cpwl import CpwlFunction, htv, pyramid_fan_mesh, pyramid_fixture
from hstv.fit2d import (
    FitProblem,
    bump_cost,
    bump_solution,
    edge_jump_system,
    fan_disc_mesh,
    lambda_threshold_experiment,
    mesh_total_variation,
    solve,
)
from hstv.mesh import MeshError, Triangulation, VertexSet


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


def boundary_ring(side):
    return [
        v
        for v in range(side * side)
        if v % side in (0, side - 1) or v // side in (0, side - 1)
    ]


def two_site_problem(lam):
    side, spacing = 9, 0.5
    mesh = lattice_mesh(side, spacing)
    pins = tuple((v, 0.0) for v in boundary_ring(side))
    return FitProblem(
        mesh=mesh,
        sites=(2 * side + 2, 6 * side + 6),
        targets=(1.0, -1.0),
        lam=lam,
        pins=pins,
    )


def test_interpolation_on_pinned_fan_costs_sixteen():
    mesh = pyramid_fan_mesh()
    pins = tuple((v, 0.0) for v in range(1, 9))
    prob = FitProblem(
        mesh=mesh, sites=(0,), targets=(1.0,), lam=math.inf, pins=pins
    )
    sol = solve(prob)
    assert sol.objective == pytest.approx(16.0, abs=1e-9)
    assert sol.htv_part == pytest.approx(16.0, abs=1e-9)
    assert sol.fidelity_part == pytest.approx(0.0, abs=1e-12)
    assert sol.certificate <= 1e-7
    assert sol.values[0] == pytest.approx(1.0, abs=1e-12)


def test_fan_bump_costs_match_inscribed_polygon_formula():
    costs = {}
    for k in (4, 6, 8, 16, 32):
        mesh = fan_disc_mesh(k, radius=1.0, outer=2.0)
        costs[k] = bump_cost(mesh, 0, 1.0)
        assert costs[k] == pytest.approx(4.0 * k * math.tan(math.pi / k), rel=1e-9)
    vals = [costs[k] for k in (4, 6, 8, 16, 32)]
    assert all(a > b for a, b in zip(vals, vals[1:]))
    assert all(v >= 4.0 * math.pi - 1e-9 for v in vals)
    assert costs[4] == pytest.approx(16.0, abs=1e-9)


def test_bump_solution_is_unit_at_site_zero_outside():
    mesh = fan_disc_mesh(8, radius=1.0, outer=2.0)
    sol = bump_solution(mesh, 0, 1.0)
    assert sol.values[0] == pytest.approx(1.0, abs=1e-12)
    assert np.max(np.abs(sol.values[9:])) <= 1e-12


def test_support_ball_must_stay_inside_mesh():
    mesh = fan_disc_mesh(8, radius=1.0, outer=2.0)
    with pytest.raises(MeshError):
        bump_solution(mesh, 0, 2.5)


def test_conflicting_nonzero_pin_rejected():
    mesh = fan_disc_mesh(8, radius=1.0, outer=2.0)
    with pytest.raises(MeshError):
        bump_solution(mesh, 0, 1.0, pins=((17, 0.5),))


def test_pinned_rim_variation_matches_compact_support_value():
    fan = pyramid_fan_mesh()
    tent = np.zeros(9)
    tent[0] = 1.0
    mtv = mesh_total_variation(fan, tent, zero_boundary=range(1, 9))
    apron = pyramid_fixture()
    exact = htv(apron, ((-1.75, -1.75), (1.75, 1.75)), p=1.0).total
    assert mtv == pytest.approx(16.0, abs=1e-12)
    assert exact == pytest.approx(16.0, abs=1e-9)


def test_interior_jump_rows_reproduce_exact_variation():
    mesh = lattice_mesh(5)
    rng = np.random.default_rng(2)
    u = CpwlFunction(mesh=mesh, values=rng.normal(size=25))
    want = htv(u, ((0.0, 0.0), (4.0, 4.0)), p=1.0).total
    got = mesh_total_variation(mesh, u.values)
    assert got == pytest.approx(want, rel=1e-9)


def test_solver_matches_reference_lp():
    rng = np.random.default_rng(4)
    mesh = lattice_mesh(4)
    edges, lengths, rows = edge_jump_system(mesh)
    for trial in range(5):
        sites = tuple(rng.choice(16, size=3, replace=False).tolist())
        targets = tuple(rng.normal(size=3).tolist())
        lam = float(rng.uniform(0.5, 5.0))
        sol = solve(
            FitProblem(mesh=mesh, sites=sites, targets=targets, lam=lam)
        )
        # reference: min l @ t + lam * sum(s) with free u
        m, n = rows.shape
        ns = len(sites)
        c = np.concatenate([np.zeros(n), lengths, lam * np.ones(ns)])
        a_ub = []
        for sgn in (1.0, -1.0):
            block = np.zeros((m, n + m + ns))
            block[:, :n] = sgn * rows
            block[:, n : n + m] = -np.eye(m)
            a_ub.append(block)
        for sgn in (1.0, -1.0):
            block = np.zeros((ns, n + m + ns))
            for i, s in enumerate(sites):
                block[i, s] = sgn
                block[i, n + m + i] = -1.0
            a_ub.append(block)
        b_ub = np.concatenate(
            [np.zeros(2 * m), np.asarray(targets), -np.asarray(targets)]
        )
        ref = linprog(
            c,
            A_ub=np.vstack(a_ub),
            b_ub=b_ub,
            bounds=[(None, None)] * n + [(0, None)] * (m + ns),
            method="highs",
        )
        assert ref.status == 0
        assert sol.objective == pytest.approx(
            ref.fun, abs=1e-7 * (1 + abs(ref.fun))
        )


def test_zero_weight_ignores_data():
    mesh = lattice_mesh(4)
    sol = solve(
        FitProblem(mesh=mesh, sites=(5, 10), targets=(3.0, -2.0), lam=0.0)
    )
    assert sol.objective == pytest.approx(0.0, abs=1e-9)
    assert sol.htv_part == pytest.approx(0.0, abs=1e-9)


def test_two_unpinned_points_fit_by_affine():
    mesh = lattice_mesh(4)
    sol = solve(
        FitProblem(mesh=mesh, sites=(0, 15), targets=(1.0, 4.0), lam=5.0)
    )
    assert sol.objective == pytest.approx(0.0, abs=1e-8)
    assert sol.fidelity_part == pytest.approx(0.0, abs=1e-9)


def test_affine_shift_of_targets_leaves_objective_unchanged():
    mesh = lattice_mesh(4)
    sites = (1, 6, 11, 12)
    targets = np.array([1.0, -0.5, 2.0, 0.25])
    base = solve(
        FitProblem(mesh=mesh, sites=sites, targets=tuple(targets), lam=2.0)
    )
    pts = mesh.vertices.coords
    shift = np.array([0.7 + 0.3 * pts[s][0] - 1.1 * pts[s][1] for s in sites])
    moved = solve(
        FitProblem(
            mesh=mesh, sites=sites, targets=tuple(targets + shift), lam=2.0
        )
    )
    assert moved.objective == pytest.approx(base.objective, abs=1e-8)
    assert moved.htv_part == pytest.approx(base.htv_part, abs=1e-8)


def test_threshold_sweep_on_two_site_lattice():
    prob = two_site_problem(1.0)
    sweep = lambda_threshold_experiment(
        prob, (1.0, 4.0 * math.pi, 20.0, 100.0)
    )
    assert sweep.lambda_star == pytest.approx(16.0, abs=1e-7)
    assert sweep.infinity_objective == pytest.approx(32.0, abs=1e-7)
    assert sweep.monotone_ok and sweep.plateau_ok and sweep.modification_ok
    by_lam = {row.lam: row for row in sweep.rows}
    # below threshold the zero function wins: all budget goes to fidelity
    assert by_lam[1.0].htv_part == pytest.approx(0.0, abs=1e-8)
    assert by_lam[1.0].fidelity_part == pytest.approx(2.0, abs=1e-8)
    assert by_lam[4.0 * math.pi].objective == pytest.approx(
        8.0 * math.pi, abs=1e-7
    )
    # above threshold the data is interpolated and the objective plateaus
    for lam in (20.0, 100.0):
        assert by_lam[lam].objective == pytest.approx(32.0, abs=1e-7)
        assert by_lam[lam].fidelity_part == pytest.approx(0.0, abs=1e-9)


def test_sweep_objective_monotone_and_concave():
    prob = two_site_problem(1.0)
    lams = (2.0, 6.0, 10.0, 14.0, 18.0, 22.0)
    sweep = lambda_threshold_experiment(prob, lams, bump_radius=0.999)
    objs = [row.objective for row in sweep.rows]
    assert all(a <= b + 1e-9 for a, b in zip(objs, objs[1:]))
    # pointwise minimum of affine functions of lambda is concave
    second = [objs[i + 1] - 2 * objs[i] + objs[i - 1] for i in range(1, 5)]
    assert all(s <= 1e-7 for s in second)


def test_problem_validation():
    mesh = lattice_mesh(3)
    good = dict(mesh=mesh, sites=(4,), targets=(1.0,), lam=1.0)
    FitProblem(**good)
    with pytest.raises(ValueError):
        FitProblem(**{**good, "sites": (9,)})
    with pytest.raises(ValueError):
        FitProblem(**{**good, "sites": (4, 4), "targets": (1.0, 1.0)})
    with pytest.raises(ValueError):
        FitProblem(**{**good, "targets": (1.0, 2.0)})
    with pytest.raises(ValueError):
        FitProblem(**{**good, "lam": -1.0})
    with pytest.raises(ValueError):
        FitProblem(**{**good, "q": 2.0})
    with pytest.raises(ValueError):
        FitProblem(**{**good, "pins": ((4, 0.0),)})
    with pytest.raises(ValueError):
        FitProblem(**{**good, "pins": ((0, 0.0), (0, 1.0))})
