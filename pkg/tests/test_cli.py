import csv
import json
import math
import subprocess
import sys

import numpy as np
import pytest

import hstv.cli as cli
from hstv.cpwl import pyramid_fan_mesh, pyramid_fixture
from hstv.mesh import mesh_from_json, mesh_to_json
from hstv.radial import cone_profile, profile_to_json


def write_json(path, obj):
    path.write_text(json.dumps(obj))
    return str(path)


@pytest.fixture()
def cone_json(tmp_path):
    return write_json(tmp_path / "cone.json", profile_to_json(cone_profile()))


@pytest.fixture()
def field45_json(tmp_path):
    c = s = math.sqrt(0.5)
    field = {"delta": 1.0, "cells": [{"z": [0.0, 0.0], "R": [[c, -s], [s, c]]}]}
    return write_json(tmp_path / "field.json", field)


def test_radial_cone_line(cone_json, capsys):
    assert cli.run(["radial", "--profile", cone_json, "--p", "1", "--r", "2"]) == 0
    out = capsys.readouterr().out.strip()
    assert out == "12.5663706144,6.28318530718,6.28318530718"


def test_mesh_gen_delaunay_and_check(tmp_path):
    rng = np.random.default_rng(3)
    pts = tmp_path / "pts.csv"
    np.savetxt(pts, rng.uniform(0.0, 1.0, size=(40, 2)), delimiter=",")
    mesh_path = tmp_path / "mesh.json"
    audit_path = tmp_path / "audit.json"
    assert (
        cli.run(
            ["mesh", "gen", "--kind", "delaunay", "--points", str(pts), "--out", str(mesh_path)]
        )
        == 0
    )
    assert (
        cli.run(["mesh", "check", "--mesh", str(mesh_path), "--out", str(audit_path)])
        == 0
    )
    audit = json.loads(audit_path.read_text())
    assert audit["delaunay_ok"] is True
    assert audit["c_bar"] > 0


def test_mesh_gen_oriented_roundtrip_and_determinism(tmp_path, field45_json):
    mesh_path = tmp_path / "omesh.json"
    audit_path = tmp_path / "oaudit.json"
    argv = [
        "mesh",
        "gen",
        "--kind",
        "oriented",
        "--field",
        field45_json,
        "--eps",
        "1/16",
        "--out",
        str(mesh_path),
        "--audit",
        str(audit_path),
    ]
    assert cli.run(argv) == 0
    audit = json.loads(audit_path.read_text())
    assert audit["delaunay_ok"] is True
    assert audit["seed"] == 0
    assert set(audit) >= {"c_bar", "nondegeneracy_c", "uniformity", "orientation_per_cell"}
    assert all(ok for _, ok in audit["orientation_per_cell"])
    obj = json.loads(mesh_path.read_text())
    assert mesh_to_json(mesh_from_json(obj)) == obj
    # byte determinism of the generator
    second = tmp_path / "omesh2.json"
    argv2 = argv[:]
    argv2[argv2.index(str(mesh_path))] = str(second)
    argv2[argv2.index(str(audit_path))] = str(tmp_path / "oaudit2.json")
    assert cli.run(argv2) == 0
    assert second.read_bytes() == mesh_path.read_bytes()


@pytest.fixture()
def oriented_mesh_json(tmp_path, field45_json):
    mesh_path = tmp_path / "omesh.json"
    assert (
        cli.run(
            [
                "mesh",
                "gen",
                "--kind",
                "oriented",
                "--field",
                field45_json,
                "--eps",
                "1/16",
                "--out",
                str(mesh_path),
            ]
        )
        == 0
    )
    return mesh_path


def test_cpwl_interp_then_htv(tmp_path, oriented_mesh_json):
    fn_path = tmp_path / "fn.json"
    br_path = tmp_path / "br.json"
    assert (
        cli.run(
            [
                "cpwl",
                "interp",
                "--mesh",
                str(oriented_mesh_json),
                "--target",
                "quad_iso",
                "--out",
                str(fn_path),
            ]
        )
        == 0
    )
    assert (
        cli.run(
            [
                "cpwl",
                "htv",
                "--fn",
                str(fn_path),
                "--box",
                "-0.3",
                "-0.3",
                "0.3",
                "0.3",
                "--p",
                "1",
                "--out",
                str(br_path),
            ]
        )
        == 0
    )
    br = json.loads(br_path.read_text())
    assert br["p"] == 1.0
    assert br["total"] > 0
    assert len(br["per_face"]) > 0
    total = sum(m * j for _, m, j in br["per_face"])
    assert total == pytest.approx(br["total"], rel=1e-12)


def test_cpwl_htv_boundary_warning_goes_to_stderr(tmp_path, capsys):
    f = pyramid_fixture()
    obj = mesh_to_json(f.mesh)
    obj["values"] = [float(v) for v in f.values]
    fn_path = write_json(tmp_path / "pyr.json", obj)
    rc = cli.run(
        ["cpwl", "htv", "--fn", fn_path, "--box", "-1", "-1", "1", "1", "--p", "1"]
    )
    captured = capsys.readouterr()
    assert rc == 0
    assert "warning:" in captured.err
    assert json.loads(captured.out)["total"] > 0


def test_approx_csv_gap_shrinks(tmp_path):
    out = tmp_path / "table.csv"
    assert (
        cli.run(
            [
                "approx",
                "--target",
                "quad_saddle",
                "--eps",
                "1/8,1/16",
                "--field",
                "adapted",
                "--out",
                str(out),
            ]
        )
        == 0
    )
    rows = list(csv.DictReader(out.read_text().splitlines()))
    assert list(rows[0]) == ["eps", "delta", "htv", "target", "gap"]
    gaps = [float(r["gap"]) for r in rows]
    assert len(gaps) == 2
    assert all(g > 0 for g in gaps)
    assert gaps[1] < gaps[0]


def test_fit_snaps_sites_and_reports(tmp_path):
    fan_path = write_json(tmp_path / "fan.json", mesh_to_json(pyramid_fan_mesh()))
    sites = tmp_path / "sites.csv"
    sites.write_text("0.01,0.02,1.0\n")
    sol_path = tmp_path / "sol.json"
    assert (
        cli.run(
            [
                "fit",
                "--mesh",
                fan_path,
                "--points",
                str(sites),
                "--lambda",
                "20",
                "--p",
                "1",
                "--q",
                "1",
                "--out",
                str(sol_path),
            ]
        )
        == 0
    )
    sol = json.loads(sol_path.read_text())
    assert sol["sites"] == [0]
    assert sol["lambda"] == 20.0
    assert abs(sol["objective"]) < 1e-9
    assert sol["snap_distances"][0] == pytest.approx(math.hypot(0.01, 0.02), abs=1e-12)
    assert sol["certificate"] <= 1e-7


def test_config_mirror_and_flag_override(tmp_path):
    conf = write_json(
        tmp_path / "conf.json",
        {
            "target": "quad_saddle",
            "eps": "1/8",
            "field": "adapted",
            "out": str(tmp_path / "c1.csv"),
            "seed": 0,
        },
    )
    assert cli.run(["approx", "--config", conf]) == 0
    assert (
        cli.run(
            [
                "approx",
                "--target",
                "quad_saddle",
                "--eps",
                "1/8",
                "--field",
                "adapted",
                "--out",
                str(tmp_path / "c2.csv"),
                "--seed",
                "0",
            ]
        )
        == 0
    )
    c1 = (tmp_path / "c1.csv").read_bytes()
    assert c1 == (tmp_path / "c2.csv").read_bytes()
    # a flag after --config overrides the mirrored value
    assert cli.run(["approx", "--config", conf, "--out", str(tmp_path / "c3.csv")]) == 0
    assert (tmp_path / "c3.csv").read_bytes() == c1


def test_validation_errors_exit_two(tmp_path, field45_json, capsys):
    assert cli.run(["radial", "--profile", str(tmp_path / "nope.json"), "--p", "1", "--r", "2"]) == 2
    assert "error:" in capsys.readouterr().err
    with pytest.raises(SystemExit) as exc:
        cli.run(["bogus"])
    assert exc.value.code == 2
    # delta below the grid constant times eps
    assert (
        cli.run(
            [
                "mesh",
                "gen",
                "--kind",
                "oriented",
                "--field",
                field45_json,
                "--eps",
                "1/2",
                "--out",
                str(tmp_path / "x.json"),
            ]
        )
        == 2
    )


def test_numeric_failures_exit_three(monkeypatch, cone_json, capsys):
    def boom(args):
        raise ArithmeticError("certificate out of tolerance")

    monkeypatch.setattr(cli, "_cmd_radial", boom)
    assert cli.run(["radial", "--profile", cone_json, "--p", "1", "--r", "2"]) == 3
    assert "numeric failure" in capsys.readouterr().err


def test_console_script_entry_point(cone_json):
    proc = subprocess.run(
        [sys.executable, "-m", "hstv.cli", "radial", "--profile", cone_json, "--p", "1", "--r", "2"],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0
    assert proc.stdout.strip() == "12.5663706144,6.28318530718,6.28318530718"
