import csv
import json
import os
import subprocess
import sys

import numpy as np
import pytest

from memstab.cli import main


def run(argv, capsys):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def test_mesh_info(capsys):
    code, out, _ = run(["mesh", "info", "--n", "4"], capsys)
    assert code == 0
    info = json.loads(out)["results"]["mesh"]
    assert (info["nodes"], info["triangles"], info["interior"]) == (25, 32, 9)


def test_usage_error_exit_2():
    proc = subprocess.run([sys.executable, "-m", "memstab.cli", "mesh", "info", "--n", "0"],
                          capture_output=True, text=True)
    assert proc.returncode == 2
    assert "positive integer" in proc.stderr


def test_spectrum_csv(tmp_path, capsys):
    pfile = tmp_path / "paper.json"
    pfile.write_text(json.dumps({"eta": 0.2, "alpha": 1, "delta": 1, "kappa": 1.5,
                                 "beta": 1.5, "gamma": 0.5, "lambda": 3}))
    code, out, _ = run(["spectrum", "--params", str(pfile), "--nu", "4", "--kmax", "50",
                        "--out", str(tmp_path)], capsys)
    assert code == 0
    rows = list(csv.DictReader(open(tmp_path / "spectrum.csv")))
    assert len(rows) == 50
    assert sum(int(r["unstable_flag"]) for r in rows) == 2
    assert float(rows[0]["mu_plus_re"]) == -3.8489208802178716
    man = json.loads(out)
    assert all(os.path.exists(f) for f in man["outputs"])


def test_spectrum_inconclusive_exit_1(tmp_path, capsys):
    code, _, err = run(["spectrum", "--nu", "10.4", "--kmax", "3", "--out", str(tmp_path)], capsys)
    assert code == 1
    lines = err.strip().splitlines()
    assert len(lines) == 1
    payload = json.loads(lines[0])
    assert payload["error"] == "InconclusiveEnumerationError"


def test_outputs_are_deterministic(tmp_path, capsys):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        assert run(["spectrum", "--nu", "4", "--kmax", "20", "--discrete", "--n", "4", "--out", str(d)], capsys)[0] == 0
    for name in ("spectrum.csv", "discrete_spectrum.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    ha = json.loads((a / "manifest.json").read_text())["config_hash"]
    hb = json.loads((b / "manifest.json").read_text())["config_hash"]
    assert ha != hb  # the output directory is part of the configuration
    code, out1, _ = run(["mesh", "info", "--n", "3"], capsys)
    code, out2, _ = run(["mesh", "info", "--n", "3"], capsys)
    assert json.loads(out1)["config_hash"] == json.loads(out2)["config_hash"]


def test_riccati_outputs(tmp_path, capsys):
    code, _, _ = run(["riccati", "--nu", "4", "--n", "4", "--out", str(tmp_path)], capsys)
    assert code == 0
    import scipy.io
    P = scipy.io.mmread(str(tmp_path / "P.mtx"))
    assert P.shape == (18, 18)
    summary = json.loads((tmp_path / "riccati_summary.json").read_text())
    assert summary["residual"] <= 1e-9 and summary["closed_loop_abscissa"] < 0


def test_riccati_rejects_large_shift(tmp_path, capsys):
    code, _, err = run(["riccati", "--nu", "11", "--n", "4", "--out", str(tmp_path)], capsys)
    assert code == 1 and "nu0" in err


def test_steady_manufactured(tmp_path, capsys):
    code, _, _ = run(["steady", "--n", "8", "--manufactured", "sinsin", "--out", str(tmp_path)], capsys)
    assert code == 0
    data = np.loadtxt(tmp_path / "steady.csv", delimiter=",", skiprows=1)
    assert data.shape == (81, 3)
    assert np.allclose(data[:, 2], np.sin(np.pi * data[:, 0]) * np.sin(np.pi * data[:, 1]), atol=1e-12)


def test_steady_forcing_file(tmp_path, capsys):
    f = tmp_path / "f.csv"
    xy = np.array([(i / 4, j / 4) for j in range(5) for i in range(5)])
    np.savetxt(f, np.c_[xy, np.ones(25)], delimiter=",", header="x,y,value", comments="")
    code, _, _ = run(["steady", "--n", "4", "--forcing-file", str(f), "--out", str(tmp_path)], capsys)
    assert code == 0
    vals = np.loadtxt(tmp_path / "steady.csv", delimiter=",", skiprows=1)[:, 2]
    assert vals.max() > 0
    np.savetxt(f, np.c_[xy[:-1], np.ones(24)], delimiter=",", header="x,y,value", comments="")
    code, _, err = run(["steady", "--n", "4", "--forcing-file", str(f), "--out", str(tmp_path)], capsys)
    assert code == 1 and "misses node" in err


def test_simulate_stable_config(tmp_path, capsys):
    cfg = tmp_path / "zero_open.json"
    cfg.write_text(json.dumps({"scenario": "LinearOpen", "n": 8, "T": 1.0,
                               "params": {"eta": 0.2, "alpha": 1, "delta": 1, "kappa": 1.5, "beta": 1.5,
                                          "gamma": 0.5, "lambda": 3, "nu": 1}}))
    code, _, _ = run(["simulate", "--config", str(cfg), "--out", str(tmp_path)], capsys)
    assert code == 0
    summary = json.loads((tmp_path / "zero_open_summary.json").read_text())
    assert summary["fitted_rate"] < 0
    header = (tmp_path / "zero_open.csv").read_text().splitlines()[0]
    assert header == "t,l2,h1,aux_l2"


def test_simulate_closed_and_steady(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"scenario": "SteadyNonlinearClosed", "n": 4, "T": 0.05, "name": "run",
                               "params": {"nu": 1.0}}))
    code, _, err = run(["simulate", "--config", str(cfg), "--out", str(tmp_path)], capsys)
    assert code == 0, err
    assert (tmp_path / "run.csv").exists()


def test_simulate_bad_config(tmp_path, capsys):
    cfg = tmp_path / "bad.json"
    cfg.write_text(json.dumps({"scenario": "LinearOpen", "colour": "red"}))
    code, _, err = run(["simulate", "--config", str(cfg), "--out", str(tmp_path)], capsys)
    assert code == 1 and "unknown config fields" in err


def test_assemble_dump(tmp_path, capsys):
    code, out, _ = run(["assemble", "--n", "3", "--dump", "--out", str(tmp_path)], capsys)
    assert code == 0
    assert (tmp_path / "A.mtx").exists()
    assert json.loads(out)["results"]["dims"] == {"N": 4, "dim": 8, "controls": 4}


@pytest.mark.slow
def test_reproduce_figures_small(tmp_path, capsys):
    code, out, err = run(["reproduce-figures", "--n", "4", "--T", "0.2", "--dt", "0.01",
                          "--out", str(tmp_path)], capsys)
    assert code == 0, err
    names = {p.name for p in tmp_path.iterdir()}
    for stem in ("fig2a_linear_open", "fig2b_linear_closed", "fig3a_nonlinear_open",
                 "fig3b_nonlinear_closed", "fig4a_steady_open", "fig4b_steady_closed"):
        assert f"{stem}.csv" in names
    assert "fig1a_open_loop_eigs.csv" in names and "fig1b_closed_loop_eigs.csv" in names
