"""Hessian-Schatten total variation toolkit.

Exact second-order total variation for radial profiles and piecewise-linear
functions, Delaunay meshing with exact predicates and symbolic tie-breaking,
orientation-adapted grids, interpolation density experiments, and L1-penalized
data fitting by linear programming.
"""

from .approx import (
    DensityRow,
    SmoothTarget,
    built_in_target,
    density_experiment,
    hessian_orientation_field,
    rotation_from_hessian,
    target_htv_exact,
    uniform_error_audit,
)
from .cpwl import (
    BoundaryFaceWarning,
    CpwlFunction,
    HtvBreakdown,
    htv,
    interpolate,
    pyramid_fan_mesh,
    pyramid_fixture,
    twin_pyramid_fixture,
)
from .delaunay import convex_envelope_cpwl, delaunay_triangulate
from .fit2d import (
    FitProblem,
    FitSolution,
    bump_cost,
    bump_solution,
    edge_jump_system,
    fan_disc_mesh,
    lambda_threshold_experiment,
    mesh_total_variation,
    solve,
)
from .mesh import (
    MeshAudit,
    MeshError,
    Triangulation,
    VertexSet,
    audit_mesh,
    check_delaunay,
    check_nondegenerate,
    check_uniform,
    mesh_from_json,
    mesh_to_json,
)
from .oriented_grid import (
    GridAudit,
    GridParams,
    OrientationField,
    default_grid_constant,
    orientation_audit,
    oriented_triangulation,
    oriented_vertices,
)
from .radial import (
    HtvValue,
    Piece,
    RadialProfile,
    bump_profile,
    cone_profile,
    eval_average_gap,
    profile_from_json,
    profile_to_json,
    radial_htv,
)
from .schatten import (
    GeneralMatrix,
    PExponent,
    SymMatrix,
    jacobi_eigenvalues,
    schatten_norm,
    singular_values,
    trace_schatten_gap,
)
from .simplex import LpError, LpSolution, simplex_solve

__version__ = "0.1.0"

__all__ = [
    "BoundaryFaceWarning",
    "CpwlFunction",
    "DensityRow",
    "FitProblem",
    "FitSolution",
    "GeneralMatrix",
    "GridAudit",
    "GridParams",
    "HtvBreakdown",
    "HtvValue",
    "LpError",
    "LpSolution",
    "MeshAudit",
    "MeshError",
    "OrientationField",
    "PExponent",
    "Piece",
    "RadialProfile",
    "SmoothTarget",
    "SymMatrix",
    "Triangulation",
    "VertexSet",
    "audit_mesh",
    "built_in_target",
    "bump_cost",
    "bump_profile",
    "bump_solution",
    "check_delaunay",
    "check_nondegenerate",
    "check_uniform",
    "cone_profile",
    "convex_envelope_cpwl",
    "default_grid_constant",
    "delaunay_triangulate",
    "density_experiment",
    "edge_jump_system",
    "eval_average_gap",
    "fan_disc_mesh",
    "hessian_orientation_field",
    "htv",
    "interpolate",
    "jacobi_eigenvalues",
    "lambda_threshold_experiment",
    "mesh_from_json",
    "mesh_to_json",
    "mesh_total_variation",
    "orientation_audit",
    "oriented_triangulation",
    "oriented_vertices",
    "profile_from_json",
    "profile_to_json",
    "pyramid_fan_mesh",
    "pyramid_fixture",
    "radial_htv",
    "rotation_from_hessian",
    "schatten_norm",
    "simplex_solve",
    "singular_values",
    "solve",
    "target_htv_exact",
    "trace_schatten_gap",
    "twin_pyramid_fixture",
    "uniform_error_audit",
]
