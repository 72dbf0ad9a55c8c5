import json
import math
import subprocess
import sys

import pytest

from coexact.cli import main


def run(capsys, *args):
    code = main(list(args))
    out, err = capsys.readouterr()
    return code, out, err


@pytest.mark.parametrize("args", [
    ["spectrum", "--model", "torus", "--n", "3"],                       # no seed
    ["spectrum", "--model", "torus", "--n", "2", "--seed", "1"],
    ["berger", "--epsilon", "1.5"],
    ["cusp", "--epsilon", "1.0"],
    ["cusp", "--n", "8"],
    ["homology", "--model", "berger", "--n", "3"],
    ["filling", "--model", "torus", "--n", "3", "--cycle", "0,9,18"],
    ["filling", "--model", "torus", "--n", "3", "--r", "many"],
    ["frobnicate"],
    ["homology", "--mesh", "missing.json"],
    ["verify-all", "--criteria", "12"],
])
def test_configuration_errors_exit_with_2(capsys, args):
    code, out, err = run(capsys, *args)
    assert code == 2
    assert json.loads(err)["error"] == "config"
    assert out == ""


def test_unfillable_cycle_exits_with_3(capsys):
    code, _, err = run(capsys, "filling", "--model", "torus", "--n", "3", "--cycle", "0,9,18,0")
    assert code == 3
    assert json.loads(err)["type"] == "FillingError"


def test_malformed_mesh_exits_with_2(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"vertex_count": 6, "tets": [[0, 1, 2, 3], [0, 1, 2, 4], [0, 1, 2, 5]]}))
    code, _, err = run(capsys, "homology", "--mesh", str(path))
    assert code == 2 and json.loads(err)["error"] == "input"


def test_toml_config(tmp_path, capsys):
    cfg = tmp_path / "run.toml"
    cfg.write_text('model = "torus"\nn = 3\n[filling]\ncycle = [0, 9, 12, 3, 0]\nbackend = "highs"\n')
    code, out, _ = run(capsys, "filling", "--config", str(cfg))
    assert code == 0
    res = json.loads(out)["result"]
    assert math.isclose(res["area"], 1 / 9, rel_tol=1e-9)
    bad = tmp_path / "bad.toml"
    bad.write_text("colour = 3\n")
    assert run(capsys, "homology", "--config", str(bad))[0] == 2
    bad.write_text("n = [\n")
    assert run(capsys, "homology", "--config", str(bad))[0] == 2


def test_spectrum_on_the_flat_torus(capsys):
    code, out, _ = run(capsys, "spectrum", "--model", "torus", "--n", "16", "--count", "5", "--seed", "0")
    assert code == 0
    res = json.loads(out)["result"]
    lam = res["eigenvalues"]
    assert len(lam) == 5 and abs(lam[0] - 4 * math.pi ** 2) / (4 * math.pi ** 2) < 0.1
    assert res["kernel_dim"] == 3 + 16 ** 3 - 1


def test_berger_closed_form(capsys):
    code, out, _ = run(capsys, "berger", "--epsilon", "0.5")
    res = json.loads(out)["result"]
    assert code == 0
    assert res["invariant_eigenvalue"] == pytest.approx(1.0, abs=1e-12)
    assert res["h1_upper"] == 1.0 and res["adjoint_route_max_difference"] < 1e-12


def test_cusp_and_homology(capsys):
    code, out, _ = run(capsys, "cusp", "--epsilon", "0.01", "--n", "512")
    assert code == 0 and json.loads(out)["result"]["relative_error"] < 1e-4
    code, out, _ = run(capsys, "homology", "--model", "torus", "--n", "3")
    assert code == 0 and json.loads(out)["result"]["betti"] == [1, 3, 3, 1]


def test_outputs_are_reproducible(tmp_path, capsys):
    args = ["montecarlo", "--model", "torus", "--n", "4", "--n-traj", "256", "--T", "8", "--seed", "7", "--quiet"]
    blobs = []
    for rep in range(2):
        out = tmp_path / f"run{rep}" / "mc.json"
        assert main(args + ["--out", str(out)]) == 0
        assert (out.parent / "mc.trajectories.csv").exists()
        assert json.loads((out.parent / "mc.meta.json").read_text())["argv"][0] == "montecarlo"
        blobs.append((out.read_bytes(), (out.parent / "mc.trajectories.csv").read_bytes()))
    assert blobs[0] == blobs[1]
    assert capsys.readouterr().out == ""


def test_verify_all_subset(capsys):
    code, out, _ = run(capsys, "verify-all", "--criteria", "2,6")
    assert code == 0
    lines = out.strip().splitlines()
    assert len(lines) == 2 and all(line.startswith("[PASS]") for line in lines)


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "coexact", "berger", "--epsilon", "0.25", "--threads", "1"],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["result"]["predicted"] == 0.25
