import numpy as np
import pytest

from curlamr.cli import main, parse_config
from curlamr.mesh import build_box_mesh
from curlamr.vtkio import export_vtk

MINIMAL = """
[problem]
name = "example1/fdiv0"

[amr]
estimators = ["new"]
max_dof = 800
max_iterations = 10

[output]
directory = "{out}"
"""

COMPARISON = """
[problem]
name = "example2"
variant = "fnothdiv"

[mesh]
subdivisions = [2, 2, 2]

[amr]
estimators = ["new", "new_local", "res"]
max_dof = 700
max_iterations = 6

[solver.primal]
tol = 1e-10

[output]
directory = "{out}"
vtk = true
"""


def parse_vtk(path):
    """Minimal independent legacy-VTK reader used as the format oracle."""
    with open(path) as fh:
        lines = [ln.strip() for ln in fh]
    assert lines[0].startswith("# vtk DataFile")
    assert lines[2] == "ASCII"
    assert lines[3] == "DATASET UNSTRUCTURED_GRID"
    i = 4
    assert lines[i].startswith("POINTS")
    npts = int(lines[i].split()[1])
    pts = np.array([[float(v) for v in lines[i + 1 + k].split()]
                    for k in range(npts)])
    i += 1 + npts
    ncells, tot = (int(v) for v in lines[i].split()[1:3])
    assert tot == 5 * ncells
    cells = np.array([[int(v) for v in lines[i + 1 + k].split()][1:]
                      for k in range(ncells)])
    i += 1 + ncells
    assert lines[i].startswith("CELL_TYPES")
    types = [int(lines[i + 1 + k]) for k in range(ncells)]
    assert set(types) == {10}
    i += 1 + ncells
    data = {}
    if i < len(lines) and lines[i].startswith("CELL_DATA"):
        i += 1
        while i < len(lines) and lines[i].startswith("SCALARS"):
            name = lines[i].split()[1]
            vals = [float(lines[i + 2 + k]) for k in range(ncells)]
            data[name] = np.array(vals)
            i += 2 + ncells
    return pts, cells, data


def test_export_vtk_roundtrip(tmp_path, unit_cube):
    path = tmp_path / "cube.vtk"
    export_vtk(unit_cube, {"eta_K": np.zeros(unit_cube.num_tets),
                           "subdomain": np.zeros(unit_cube.num_tets)}, path)
    pts, cells, data = parse_vtk(path)
    assert pts.shape == (unit_cube.num_vertices, 3)
    assert cells.shape == (unit_cube.num_tets, 4)
    assert np.array_equal(cells, unit_cube.tets)
    assert set(data) == {"eta_K", "subdomain"}


def test_export_vtk_geometry_only(tmp_path, unit_cube):
    path = tmp_path / "geo.vtk"
    export_vtk(unit_cube, {}, path)
    pts, cells, data = parse_vtk(path)
    assert data == {}


def test_export_vtk_size_mismatch(tmp_path, unit_cube):
    with pytest.raises(ValueError, match="shape"):
        export_vtk(unit_cube, {"eta_K": np.zeros(3)}, tmp_path / "bad.vtk")


def test_validate_ok(tmp_path, capsys):
    cfg = tmp_path / "run.toml"
    cfg.write_text(MINIMAL.format(out=tmp_path / "out"))
    assert main(["validate", str(cfg)]) == 0
    assert "valid" in capsys.readouterr().out


def test_missing_problem_key(tmp_path, capsys):
    cfg = tmp_path / "run.toml"
    cfg.write_text("[amr]\nmax_dof = 100\n")
    assert main(["run", str(cfg)]) == 2
    assert "problem" in capsys.readouterr().err


def test_bad_estimator_key(tmp_path, capsys):
    cfg = tmp_path / "run.toml"
    cfg.write_text('[problem]\nname = "example1/fdiv0"\n'
                   '[amr]\nestimators = ["zz"]\n')
    assert main(["run", str(cfg)]) == 2
    assert "amr.estimators" in capsys.readouterr().err


def test_minimal_run(tmp_path):
    out = tmp_path / "out"
    cfg = tmp_path / "run.toml"
    cfg.write_text(MINIMAL.format(out=out))
    assert main(["run", str(cfg)]) == 0
    csv = (out / "new_convergence.csv").read_text().strip().splitlines()
    assert csv[0] == "iter,dof,error,rel_error,eta,eff_index,seconds"
    dofs = [int(ln.split(",")[1]) for ln in csv[1:]]
    assert all(b > a for a, b in zip(dofs, dofs[1:]))
    assert (out / "summary.txt").exists()


def test_comparison_run_and_export(tmp_path):
    out = tmp_path / "cmp"
    cfg = tmp_path / "run.toml"
    cfg.write_text(COMPARISON.format(out=out))
    assert main(["run", str(cfg)]) == 0
    for est in ("new", "new_local", "res"):
        assert (out / f"{est}_convergence.csv").exists()
        pts, cells, data = parse_vtk(out / f"{est}_final.vtk")
        assert "eta_K" in data and "subdomain" in data
    summary = (out / "summary.txt").read_text()
    assert summary.count("\n") >= 4

    # export regenerates VTK from the saved npz state
    for vtk in out.glob("*_final.vtk"):
        vtk.unlink()
    assert main(["export", str(out)]) == 0
    assert len(list(out.glob("*_final.vtk"))) == 3


def test_rerun_bit_identical(tmp_path):
    cfg = tmp_path / "run.toml"
    out1, out2 = tmp_path / "a", tmp_path / "b"
    for out in (out1, out2):
        cfg.write_text(MINIMAL.format(out=out))
        assert main(["run", str(cfg)]) == 0
    a = (out1 / "new_convergence.csv").read_text()
    b = (out2 / "new_convergence.csv").read_text()
    # identical up to the wall-clock column
    strip = lambda text: ["," .join(ln.split(",")[:-1]) for ln in text.splitlines()]
    assert strip(a) == strip(b)


def test_parse_config_solver_sections(tmp_path):
    cfg = tmp_path / "run.toml"
    cfg.write_text('[problem]\nname = "example2/fdiv0"\na = 0.01\n'
                   '[solver.primal]\nmode = "inexact"\niterations = 3\n'
                   '[amr]\nmax_dof = 100\n')
    parsed = parse_config(cfg)
    assert parsed["amr_template"]["solver_primal"].mode == "inexact"
    assert parsed["problem"].params["a"] == 0.01
