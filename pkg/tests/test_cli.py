"""Command-line interface tests: configs, subcommands, exit codes, outputs."""

import json
import os

import numpy as np
import pytest

import selfsim as ss
from selfsim import cli, field as fld

from conftest import quiescent_field


def small_config(tmp_path, **overrides):
    cfg = {
        "gas": {"a": 1.0, "gamma": 2.0},
        "grid": {"x0": -0.5, "x1": 0.5, "y0": -0.5, "y1": 0.5,
                 "nx": 17, "ny": 17},
        "boundary": {"kind": "quiescent", "K": -1.0},
        "solver": {"eps0": 0.1, "ratio": 0.25, "eps_min": 1e-4},
        "output": {"dir": str(tmp_path)},
    }
    cfg.update(overrides)
    path = tmp_path / "config.json"
    path.write_text(json.dumps(cfg))
    return path


def test_solve_potential_end_to_end(tmp_path):
    path = small_config(tmp_path)
    assert cli.main(["solve-potential", "--config", str(path)]) == 0
    phi = fld.read_field(tmp_path / "phi.f2d")
    grid = phi.grid
    exact = quiescent_field(grid)
    assert np.max(np.abs(phi.values - exact.values)) < 1e-8
    for name in ("c2.f2d", "L2.f2d", "report.json"):
        assert (tmp_path / name).exists()
    payload = json.loads((tmp_path / "report.json").read_text())
    assert payload["report"]["status"] == "Converged"
    assert payload["report"]["audit"] == "Pass"
    assert "timestamp" in payload["meta"]


def test_solve_potential_csv_output(tmp_path):
    path = small_config(tmp_path, output={"dir": str(tmp_path), "csv": True})
    assert cli.main(["solve-potential", "--config", str(path)]) == 0
    lines = (tmp_path / "phi.csv").read_text().splitlines()
    assert lines[0] == "xi1,xi2,value"
    assert len(lines) == 17 * 17 + 1


def test_boundary_table_kind(tmp_path):
    grid = ss.Grid2D(-0.5, 0.5, -0.5, 0.5, 9, 9)
    table = quiescent_field(grid).values.tolist()
    path = small_config(
        tmp_path,
        grid={"x0": -0.5, "x1": 0.5, "y0": -0.5, "y1": 0.5, "nx": 9, "ny": 9},
        boundary={"kind": "expression-table", "table": table})
    assert cli.main(["solve-potential", "--config", str(path)]) == 0


def test_boundary_file_kind(tmp_path):
    grid = ss.Grid2D(-0.5, 0.5, -0.5, 0.5, 9, 9)
    bpath = tmp_path / "phi_b.f2d"
    fld.write_field(quiescent_field(grid), bpath)
    path = small_config(
        tmp_path,
        grid={"x0": -0.5, "x1": 0.5, "y0": -0.5, "y1": 0.5, "nx": 9, "ny": 9},
        boundary={"kind": "file", "path": str(bpath)})
    assert cli.main(["solve-potential", "--config", str(path)]) == 0


def test_solve_quasi_end_to_end(tmp_path):
    path = small_config(
        tmp_path,
        grid={"x0": 0.1, "x1": 0.6, "y0": 0.1, "y1": 0.6, "nx": 17, "ny": 17},
        quasi={"delta_targets": [0.0], "anchor": [8, 8]})
    assert cli.main(["solve-quasi", "--config", str(path)]) == 0
    for name in ("psi", "zeta", "omega_tilde", "c2", "N1", "F1"):
        assert (tmp_path / f"{name}.f2d").exists()
    payload = json.loads((tmp_path / "report.json").read_text())
    assert payload["report"]["status"] == "Converged"


def test_classify_subcommand(tmp_path):
    grid = ss.Grid2D(-0.5, 0.5, -0.5, 0.5, 17, 17)
    U = ss.VectorField.from_function(grid, lambda x, y: -x, lambda x, y: -y)
    c2 = ss.ScalarField.from_function(grid, lambda x, y: 1.0)
    fld.write_field(U, tmp_path / "U.f2d")
    fld.write_field(c2, tmp_path / "c2.f2d")
    assert cli.main(["classify", "--u", str(tmp_path / "U.f2d"),
                     "--c2", str(tmp_path / "c2.f2d"),
                     "--out-dir", str(tmp_path)]) == 0
    payload = json.loads((tmp_path / "classify.json").read_text())
    assert payload["report"]["audit"] == "Pass"
    assert payload["report"]["counts"]["subsonic"] == 17 * 17
    assert (tmp_path / "discriminant.f2d").exists()


def test_decompose_subcommand(tmp_path):
    grid = ss.Grid2D(-0.5, 0.5, -0.5, 0.5, 17, 17)
    U = ss.VectorField.from_function(grid, lambda x, y: -y + x,
                                     lambda x, y: x + y)
    fld.write_field(U, tmp_path / "U.f2d")
    assert cli.main(["decompose", "--u", str(tmp_path / "U.f2d"),
                     "--out-dir", str(tmp_path)]) == 0
    payload = json.loads((tmp_path / "decompose.json").read_text())
    assert payload["report"]["div_W_norm"] < 1e-10
    W = fld.read_field(tmp_path / "W.f2d")
    assert isinstance(W, ss.VectorField)


def test_transport_subcommand(tmp_path):
    grid = ss.Grid2D(0.25, 0.75, 0.25, 0.75, 17, 17)
    psi = ss.ScalarField.from_function(grid,
                                       lambda x, y: -(x ** 2 + y ** 2) / 2)
    fld.write_field(psi, tmp_path / "psi.f2d")
    (tmp_path / "inflow.json").write_text(json.dumps({"top": 1.0,
                                                      "right": 1.0}))
    assert cli.main(["transport", "--psi", str(tmp_path / "psi.f2d"),
                     "--inflow", str(tmp_path / "inflow.json"),
                     "--out-dir", str(tmp_path)]) == 0
    omega = fld.read_field(tmp_path / "omega.f2d")
    assert np.all(np.isfinite(omega.values))
    payload = json.loads((tmp_path / "transport.json").read_text())
    assert payload["report"]["uncovered"] == 0


def test_verify_subcommand(capsys):
    assert cli.main(["verify"]) == 0
    out = capsys.readouterr().out
    assert "0 failed" in out


def test_exit_code_missing_config(tmp_path):
    assert cli.main(["solve-potential", "--config",
                     str(tmp_path / "nope.json")]) == 3


def test_exit_code_malformed_json(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    assert cli.main(["solve-potential", "--config", str(p)]) == 2


def test_exit_code_unknown_key_strict(tmp_path):
    path = small_config(tmp_path, extra_section={"x": 1})
    assert cli.main(["--strict", "solve-potential",
                     "--config", str(path)]) == 2


def test_unknown_key_warns_without_strict(tmp_path, capsys):
    path = small_config(tmp_path, extra_section={"x": 1})
    assert cli.main(["solve-potential", "--config", str(path)]) == 0
    assert "unknown top-level key" in capsys.readouterr().err


def test_exit_code_bad_inflow_side(tmp_path):
    grid = ss.Grid2D(0.25, 0.75, 0.25, 0.75, 9, 9)
    psi = ss.ScalarField.from_function(grid, lambda x, y: -x * x)
    fld.write_field(psi, tmp_path / "psi.f2d")
    (tmp_path / "inflow.json").write_text(json.dumps({"north": 1.0}))
    assert cli.main(["transport", "--psi", str(tmp_path / "psi.f2d"),
                     "--inflow", str(tmp_path / "inflow.json"),
                     "--out-dir", str(tmp_path)]) == 2


def test_exit_code_bad_grid(tmp_path):
    path = small_config(
        tmp_path,
        grid={"x0": 0.5, "x1": -0.5, "y0": -0.5, "y1": 0.5,
              "nx": 9, "ny": 9})
    assert cli.main(["solve-potential", "--config", str(path)]) == 2
