import csv
import json

import numpy as np
import pytest

from decoupled_biharm.cli import CSV_COLUMNS, main
from decoupled_biharm.mesh import build_box_mesh
from decoupled_biharm.mms import exact_norms


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def _vtk_sections(text):
    lines = text.splitlines()

    def block(header, count):
        i = lines.index(header)
        return lines[i + 1:i + 1 + count]
    return lines, block


def test_mesh_info(capsys):
    assert main(["mesh", "--n", "1", "--info"]) == 0
    out = capsys.readouterr().out
    assert out.startswith("V=8 E=19 F=18 C=6 h=1.7320508")


def test_mesh_interior_vertex(capsys):
    assert main(["mesh", "--n", "2", "--info"]) == 0
    assert "interior_V=1" in capsys.readouterr().out


def test_mesh_missing_n(capsys):
    assert main(["mesh"]) == 2
    assert "usage" in capsys.readouterr().err


def test_bad_n(capsys):
    assert main(["mesh", "--n", "0"]) == 2


def test_bad_levels(capsys, tmp_path):
    assert main(["convergence", "--levels", "4,2", "--out", str(tmp_path / "x.csv")]) == 2


def test_convergence_columns_and_json(tmp_path):
    out, js = tmp_path / "a.csv", tmp_path / "a.json"
    assert main(["convergence", "--levels", "1,2", "--out", str(out), "--json", str(js)]) == 0
    with open(out) as fh:
        assert fh.readline().strip() == ",".join(CSV_COLUMNS)
    rows = _rows(out)
    assert [r["n"] for r in rows] == ["1", "2"]
    assert rows[1]["dof_p"] == "1" and rows[1]["err_zeta_l2"] != ""
    data = json.loads(js.read_text())
    assert len(data["rates"]["err_u_h1"]) == 1 and len(data["rows"]) == 2


def test_convergence_scheme_b_gauge_columns(tmp_path):
    out = tmp_path / "b.csv"
    assert main(["convergence", "--scheme", "B", "--levels", "1,2", "--out", str(out)]) == 0
    for row in _rows(out):
        assert row["dof_p"] == "" and row["err_zeta_l2"] == "" and row["err_p_h1"] == ""


def test_convergence_zero_data(tmp_path):
    out = tmp_path / "z.csv"
    assert main(["convergence", "--levels", "1,2", "--zero-data", "--out", str(out)]) == 0
    ref = exact_norms()
    for row in _rows(out):
        for key in ("err_r_l2", "err_r_h1", "err_phi_l2", "err_phi_h1", "err_zeta_l2",
                    "err_zeta_hcurl", "err_p_h1", "err_u_h1"):
            assert float(row[key]) == pytest.approx(ref[key], rel=1e-12, abs=1e-300)


def test_convergence_deterministic(tmp_path):
    a, b = tmp_path / "1.csv", tmp_path / "2.csv"
    args = ["convergence", "--case", "var-alpha", "--levels", "1,2"]
    assert main(args + ["--out", str(a)]) == 0
    assert main(args + ["--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_convergence_solver_failure(tmp_path, capsys):
    out = tmp_path / "f.csv"
    assert main(["convergence", "--levels", "1", "--tol", "1e-30", "--out", str(out)]) == 3
    assert out.read_text().strip() == ",".join(CSV_COLUMNS)
    assert "solver failure" in capsys.readouterr().err


@pytest.mark.parametrize("case,n", [("poly", 4), ("var-alpha", 2)])
def test_compare_ab(case, n, capsys):
    assert main(["compare-ab", "--case", case, "--n", str(n)]) == 0
    out = capsys.readouterr().out
    assert out.count("ok") == 4


def test_infsup(tmp_path, capsys):
    out = tmp_path / "i.csv"
    assert main(["infsup", "--levels", "1,2,3", "--out", str(out)]) == 0
    rows = _rows(out)
    assert list(rows[0]) == ["n", "dim_ned", "dim_constraint", "beta"]
    assert [float(r["beta"]) > 0 for r in rows] == [True] * 3
    assert "min/max ratio=" in capsys.readouterr().out


def test_infsup_rejects_large_level(tmp_path, capsys):
    assert main(["infsup", "--levels", "4", "--out", str(tmp_path / "i.csv")]) == 2
    assert "levels up to 3" in capsys.readouterr().err


def test_export_single_cube(tmp_path):
    out = tmp_path / "m.vtk"
    assert main(["export", "--n", "1", "--out", str(out)]) == 0
    lines, block = _vtk_sections(out.read_text())
    assert lines[0] == "# vtk DataFile Version 3.0"
    assert "DATASET UNSTRUCTURED_GRID" in lines
    assert "POINTS 8 double" in lines and "CELLS 6 30" in lines
    assert block("CELL_TYPES 6", 6) == ["10"] * 6
    assert "VECTORS curl_zeta double" in lines


def test_export_zero_data(tmp_path):
    out = tmp_path / "z.vtk"
    assert main(["export", "--n", "2", "--zero-data", "--out", str(out)]) == 0
    lines, block = _vtk_sections(out.read_text())
    data = (block("LOOKUP_TABLE default", 27) + block("VECTORS phi double", 27)
            + block("VECTORS curl_zeta double", 48))
    assert all(float(v) == 0.0 for line in data for v in line.split())


def test_export_center_value(tmp_path):
    out = tmp_path / "p.vtk"
    assert main(["export", "--case", "poly", "--n", "2", "--out", str(out)]) == 0
    lines, block = _vtk_sections(out.read_text())
    u = np.array([float(v) for v in block("SCALARS u double 1", 28)[1:]])
    center = int(np.flatnonzero(~build_box_mesh(2).boundary_vertices)[0])
    assert abs(u[center] - 1 / 4096) <= 0.2 / 4096


def test_export_unwritable(tmp_path, capsys):
    assert main(["export", "--n", "1", "--out", str(tmp_path / "missing" / "x.vtk")]) == 4
    assert "I/O error" in capsys.readouterr().err


def test_log_level(monkeypatch, capsys, tmp_path):
    import logging
    monkeypatch.setenv("LOG_LEVEL", "info")
    root = logging.getLogger()
    saved = root.handlers[:]
    root.handlers.clear()
    try:
        assert main(["convergence", "--levels", "1", "--out", str(tmp_path / "l.csv")]) == 0
        assert "stage 2" in capsys.readouterr().err
    finally:
        root.handlers[:] = saved
