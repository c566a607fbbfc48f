"""Command line interface: one entry point per library operation.

Subcommands: radial, mesh gen, mesh check, cpwl interp, cpwl htv, approx,
fit.  Exact rationals like 1/32 are accepted wherever a pitch or weight is
read; reports print 12 significant digits; JSON artifacts round-trip through
the matching readers.  A JSON file mirroring the flags can be supplied with
--config (explicit flags given after it win).  Exit codes: 0 success, 2
validation error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import warnings
from fractions import Fraction

import numpy as np

from .approx import DEFAULT_DOMAIN, built_in_target, density_experiment
from .cpwl import BoundaryFaceWarning, CpwlFunction, htv, interpolate
from .delaunay import delaunay_triangulate
from .fit2d import FitProblem, solve
from .mesh import (
    MeshError,
    Triangulation,
    VertexSet,
    audit_mesh,
    mesh_from_json,
    mesh_to_json,
)
from .oriented_grid import GridParams, OrientationField, oriented_triangulation
from .radial import profile_from_json, radial_htv

__all__ = ["main", "run"]

_APPROX_TARGETS = ("quad_iso", "quad_saddle", "quad_aniso", "affine", "radial_quartic")


def _fmt(x: float) -> str:
    return f"{float(x):.12g}"


def _rational(text: str) -> float:
    """Parse 1/32, 0.03125, or 2 exactly via Fraction."""
    return float(Fraction(text.strip()))


def _exponent(text: str) -> float:
    t = text.strip().lower()
    if t in ("inf", "infinity", "oo"):
        return math.inf
    return float(Fraction(t))


def _load_json(path: str):
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def _dump_json(obj, path: str | None) -> None:
    text = json.dumps(obj, sort_keys=True, indent=1)
    if path is None:
        sys.stdout.write(text + "\n")
    else:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")


def _interp_target(name: str, d: int):
    """Value function for a named interpolation target."""
    if name == "gauss":
        return lambda x: math.exp(-0.5 * float(np.dot(x, x)))
    if name == "cone":
        return lambda x: max(1.0 - float(np.linalg.norm(x)), 0.0)
    return built_in_target(name, d).value


def _expand_config(argv: list) -> list:
    """Replace --config FILE with the flags its JSON mirror encodes."""
    if "--config" not in argv:
        return argv
    i = argv.index("--config")
    if i + 1 >= len(argv):
        raise ValueError("--config needs a file argument")
    conf = _load_json(argv[i + 1])
    if not isinstance(conf, dict):
        raise ValueError("config file must hold a JSON object of flags")
    injected = []
    for key in sorted(conf):
        val = conf[key]
        flag = "--" + str(key)
        if isinstance(val, bool):
            if val:
                injected.append(flag)
        elif isinstance(val, (list, tuple)):
            injected.append(flag)
            injected.extend(str(v) for v in val)
        else:
            injected.extend([flag, str(val)])
    return argv[:i] + injected + argv[i + 2 :]


def _build_parser() -> argparse.ArgumentParser:
    top = argparse.ArgumentParser(prog="hstv", description=__doc__)
    sub = top.add_subparsers(dest="command", required=True)

    pr = sub.add_parser("radial", help="Hessian variation of a radial profile")
    pr.add_argument("--profile", required=True, help="profile JSON file")
    pr.add_argument("--p", type=_exponent, default=1.0, help="Schatten exponent (inf ok)")
    pr.add_argument("--r", type=_rational, required=True, help="ball radius")

    pm = sub.add_parser("mesh", help="mesh generation and audits")
    msub = pm.add_subparsers(dest="mesh_command", required=True)

    pg = msub.add_parser("gen", help="generate a triangulation")
    pg.add_argument("--kind", choices=("delaunay", "oriented"), required=True)
    pg.add_argument("--points", help="CSV of points, one per row (kind delaunay)")
    pg.add_argument("--field", help="orientation field JSON (kind oriented)")
    pg.add_argument("--eps", type=_rational, help="lattice pitch (kind oriented)")
    pg.add_argument("--box", type=float, nargs=4, metavar=("X0", "Y0", "X1", "Y1"))
    pg.add_argument("--audit", help="write the grid audit JSON here")
    pg.add_argument("--seed", type=int, default=0)
    pg.add_argument("--out", required=True, help="mesh JSON output")

    pc = msub.add_parser("check", help="audit an existing mesh")
    pc.add_argument("--mesh", required=True)
    pc.add_argument("--eps", type=_rational, help="pitch for the uniformity audit")
    pc.add_argument("--box", type=float, nargs=4, metavar=("X0", "Y0", "X1", "Y1"))
    pc.add_argument("--seed", type=int, default=0)
    pc.add_argument("--out", help="audit JSON output (default stdout)")

    pw = sub.add_parser("cpwl", help="piecewise linear interpolants")
    wsub = pw.add_subparsers(dest="cpwl_command", required=True)

    pi = wsub.add_parser("interp", help="interpolate a named target on a mesh")
    pi.add_argument("--mesh", required=True)
    pi.add_argument(
        "--target",
        required=True,
        choices=_APPROX_TARGETS + ("gauss", "cone"),
    )
    pi.add_argument("--out", required=True, help="function JSON output")

    ph = wsub.add_parser("htv", help="Hessian variation over a box")
    ph.add_argument("--fn", required=True, help="function JSON (mesh plus values)")
    ph.add_argument(
        "--box", type=float, nargs=4, required=True, metavar=("X0", "Y0", "X1", "Y1")
    )
    ph.add_argument("--p", type=_exponent, default=1.0)
    ph.add_argument("--out", help="breakdown JSON output (default stdout)")

    pa = sub.add_parser("approx", help="interpolation gap across pitches")
    pa.add_argument("--target", required=True, choices=_APPROX_TARGETS)
    pa.add_argument("--eps", required=True, help="comma list of pitches, e.g. 1/16,1/32")
    pa.add_argument("--box", type=float, nargs=4, metavar=("X0", "Y0", "X1", "Y1"))
    pa.add_argument("--field", choices=("adapted", "identity"), default="adapted")
    pa.add_argument("--seed", type=int, default=0)
    pa.add_argument("--out", required=True, help="CSV output")

    pf = sub.add_parser("fit", help="variation-regularized data fitting")
    pf.add_argument("--mesh", required=True)
    pf.add_argument("--points", required=True, help="CSV rows x,y,value")
    pf.add_argument("--lambda", dest="lam", required=True, help="weight or inf")
    pf.add_argument("--p", type=_exponent, default=1.0)
    pf.add_argument("--q", type=_exponent, default=1.0)
    pf.add_argument("--seed", type=int, default=0)
    pf.add_argument("--out", required=True, help="solution JSON output")
    return top


def _cmd_radial(args) -> int:
    profile = profile_from_json(_load_json(args.profile))
    val = radial_htv(profile, args.p, args.r)
    print(f"{_fmt(val.value)},{_fmt(val.jump_part)},{_fmt(val.ac_part)}")
    return 0


def _field_bbox(field: OrientationField) -> tuple:
    centers = np.array([field.center(k) for k in field.cells])
    lo = centers.min(axis=0) - field.delta / 2.0
    hi = centers.max(axis=0) + field.delta / 2.0
    return tuple(float(v) for v in lo), tuple(float(v) for v in hi)


def _cmd_mesh_gen(args) -> int:
    if args.kind == "delaunay":
        if not args.points:
            raise MeshError("--kind delaunay needs --points")
        pts = np.loadtxt(args.points, delimiter=",", ndmin=2)
        tri = delaunay_triangulate(VertexSet.from_points(pts))
        _dump_json(mesh_to_json(tri), args.out)
        if args.audit:
            ok_box = (pts.min(axis=0), pts.max(axis=0))
            audit = audit_mesh(tri, _default_eps(tri), ok_box)
            _dump_json(_audit_json(audit, args.seed), args.audit)
        return 0
    if not args.field or args.eps is None:
        raise MeshError("--kind oriented needs --field and --eps")
    field = OrientationField.from_json(_load_json(args.field))
    box = (
        (tuple(args.box[:2]), tuple(args.box[2:]))
        if args.box
        else _field_bbox(field)
    )
    params = GridParams(eps=args.eps, delta=field.delta, box=box)
    tri, audit = oriented_triangulation(field, params)
    _dump_json(mesh_to_json(tri), args.out)
    if args.audit:
        out = audit.to_json()
        out["seed"] = args.seed
        _dump_json(out, args.audit)
    return 0


def _default_eps(tri: Triangulation) -> float:
    pts = tri.vertices.coords
    best = math.inf
    for f, _ in tri.interior_faces() + tri.boundary_faces():
        best = min(best, float(np.linalg.norm(pts[f[0]] - pts[f[1]])))
    return best


def _audit_json(audit, seed: int) -> dict:
    uni = audit.uniformity
    return {
        "delaunay_ok": bool(audit.delaunay_ok),
        "worst_insphere_violation": float(audit.worst_insphere_violation),
        "nondegeneracy_c": float(audit.nondegeneracy_c),
        "uniformity": {
            "c_bar_min_dist": float(uni[0]),
            "c_bar_cover": float(uni[1]),
            "eps": float(uni[2]),
        },
        "c_bar": float(audit.c_bar),
        "seed": seed,
    }


def _cmd_mesh_check(args) -> int:
    tri = mesh_from_json(_load_json(args.mesh))
    pts = tri.vertices.coords
    box = (
        (tuple(args.box[:2]), tuple(args.box[2:]))
        if args.box
        else (tuple(pts.min(axis=0)), tuple(pts.max(axis=0)))
    )
    eps = args.eps if args.eps is not None else _default_eps(tri)
    audit = audit_mesh(tri, eps, box)
    _dump_json(_audit_json(audit, args.seed), args.out)
    return 0


def _cmd_cpwl_interp(args) -> int:
    tri = mesh_from_json(_load_json(args.mesh))
    fn = interpolate(tri, _interp_target(args.target, tri.dim))
    out = mesh_to_json(tri)
    out["values"] = [float(v) for v in fn.values]
    _dump_json(out, args.out)
    return 0


def _cmd_cpwl_htv(args) -> int:
    obj = _load_json(args.fn)
    tri = mesh_from_json(obj)
    if "values" not in obj:
        raise MeshError("function file must carry a values array")
    fn = CpwlFunction(mesh=tri, values=np.asarray(obj["values"], dtype=float))
    box = (tuple(args.box[:2]), tuple(args.box[2:]))
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", BoundaryFaceWarning)
        breakdown = htv(fn, box, p=args.p)
    for w in caught:
        if issubclass(w.category, BoundaryFaceWarning):
            print(f"warning: {w.message}", file=sys.stderr)
    _dump_json(
        {
            "total": float(breakdown.total),
            "p": float(args.p) if math.isfinite(args.p) else "inf",
            "per_face": [
                [list(face), float(measure), float(jump)]
                for face, measure, jump in breakdown.per_face
            ],
        },
        args.out,
    )
    return 0


def _cmd_approx(args) -> int:
    eps_seq = [_rational(tok) for tok in args.eps.split(",") if tok.strip()]
    box = (
        (tuple(args.box[:2]), tuple(args.box[2:])) if args.box else DEFAULT_DOMAIN
    )
    target = built_in_target(args.target, 2)
    rows = density_experiment(target, eps_seq, box=box, field_kind=args.field)
    lines = ["eps,delta,htv,target,gap"]
    for r in rows:
        lines.append(
            ",".join(_fmt(v) for v in (r.eps, r.delta, r.htv, r.target, r.gap))
        )
    text = "\n".join(lines) + "\n"
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(text)
    return 0


def _cmd_fit(args) -> int:
    tri = mesh_from_json(_load_json(args.mesh))
    rows = np.loadtxt(args.points, delimiter=",", ndmin=2)
    if rows.shape[1] != 3:
        raise MeshError("points file needs x,y,value rows")
    if float(args.q) != 1.0:
        raise MeshError("only q = 1 fidelity is supported")
    lam = math.inf if args.lam.strip().lower() in ("inf", "infinity") else _rational(args.lam)
    pts = tri.vertices.coords
    sites = []
    snap = []
    for x, y, _ in rows:
        d2 = np.sum((pts - (x, y)) ** 2, axis=1)
        v = int(np.argmin(d2))
        sites.append(v)
        snap.append(float(math.sqrt(d2[v])))
    prob = FitProblem(
        mesh=tri,
        sites=tuple(sites),
        targets=tuple(float(v) for v in rows[:, 2]),
        lam=lam,
        p=args.p,
    )
    sol = solve(prob)
    _dump_json(
        {
            "values": [float(v) for v in sol.values],
            "objective": sol.objective,
            "htv_part": sol.htv_part,
            "fidelity_part": sol.fidelity_part,
            "certificate": sol.certificate,
            "iterations": sol.iterations,
            "lambda": "inf" if math.isinf(lam) else lam,
            "p": float(args.p) if math.isfinite(args.p) else "inf",
            "q": 1.0,
            "sites": sites,
            "snap_distances": snap,
            "seed": args.seed,
        },
        args.out,
    )
    return 0


def run(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        argv = _expand_config(argv)
        args = _build_parser().parse_args(argv)
        if args.command == "radial":
            return _cmd_radial(args)
        if args.command == "mesh":
            if args.mesh_command == "gen":
                return _cmd_mesh_gen(args)
            return _cmd_mesh_check(args)
        if args.command == "cpwl":
            if args.cpwl_command == "interp":
                return _cmd_cpwl_interp(args)
            return _cmd_cpwl_htv(args)
        if args.command == "approx":
            return _cmd_approx(args)
        return _cmd_fit(args)
    except (MeshError, ValueError, OSError, KeyError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ArithmeticError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 3


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
