import csv
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from obstreg.cli import main

DEMOS = Path(__file__).resolve().parents[1] / "demos" / "scenarios"


def read_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.reader(fh))


def manifest(path):
    return dict(line.split(": ", 1) for line in (path / "manifest.txt").read_text().splitlines())


def test_solve_line(tmp_path):
    assert main(["solve", "--scenario", str(DEMOS / "line.ini"), "--out", str(tmp_path)]) == 0
    rows = read_csv(tmp_path / "solution.csv")
    assert rows[0] == ["x", "u", "f", "g", "slope"]
    data = np.array(rows[1:], dtype=float)
    np.testing.assert_allclose(data[:, 1], data[:, 0], atol=1e-12)
    np.testing.assert_allclose(data[:, 4], 1.0, atol=1e-9)
    assert "energy = 1" in (tmp_path / "energy.txt").read_text()
    m = manifest(tmp_path)
    assert m["version"] and m["seed"] == "0" and len(m["scenario_sha256"]) == 64


def test_verify_benchmark_and_perturbation(tmp_path):
    ok = tmp_path / "ok"
    bad = tmp_path / "bad"
    scenario = str(DEMOS / "taut_string.ini")
    assert main(["verify", "--scenario", scenario, "--out", str(ok)]) == 0
    report = {(s, i): v for s, i, v in read_csv(ok / "report.csv")[1:]}
    assert report[("A3", "violations")] == "0"
    assert report[("summary", "violations")] == "0"
    assert int(report[("P3", "vacuous")]) + int(report[("P3", "finite")]) == int(report[("P3", "pairs")])
    assert main(["verify", "--scenario", scenario, "--out", str(bad), "--inject-perturbation", "0.1"]) == 4
    assert manifest(bad)["inject_perturbation"] == "0.10000000000000001"


def test_theory_and_dini(tmp_path):
    assert main(["theory", "--scenario", str(DEMOS / "line.ini"), "--out", str(tmp_path)]) == 0
    const = read_csv(tmp_path / "constants.csv")
    assert const[0] == ["name", "k", "value"]
    names = {r[0] for r in const[1:]}
    assert {"N", "delta0", "c_k", "M_k", "alpha_k", "C1_k", "C2_k"} <= names
    pipe = read_csv(tmp_path / "pipeline.csv")
    assert pipe[0] == ["k", "eps", "Delta1", "Delta2", "Delta", "delta"] and len(pipe) == 401
    assert main(["dini", "--scenario", str(DEMOS / "line.ini"), "--out", str(tmp_path)]) == 0
    dini = read_csv(tmp_path / "dini.csv")
    assert dini[0] == ["h", "theta", "eps", "value", "verdict"]
    assert {r[4] for r in dini[1:]} == {"pass"}


def test_plot_is_deterministic(tmp_path):
    for d in ("p1", "p2"):
        assert main(["plot", "--scenario", str(DEMOS / "line.ini"), "--out", str(tmp_path / d)]) == 0
    for name in ("solution.svg", "pipeline.svg"):
        assert (tmp_path / "p1" / name).read_bytes() == (tmp_path / "p2" / name).read_bytes()


def test_sweep(tmp_path):
    assert main(["sweep", "--scenario", str(DEMOS / "sweep_mu.ini"), "--out", str(tmp_path), "--jobs", "2"]) == 0
    rows = read_csv(tmp_path / "sweep.csv")
    assert rows[0] == ["point", "lagrangian.L", "exit_code"] and len(rows) == 4
    for label, *_ in rows[1:]:
        assert (tmp_path / label / "solution.csv").exists()
    energies = [float((tmp_path / r[0] / "energy.txt").read_text().split()[2]) for r in rows[1:]]
    assert energies[1] == pytest.approx(2 * energies[0], rel=1e-9)


def test_csv_deterministic_given_seed(tmp_path):
    scenario = str(DEMOS / "line.ini")
    for d in ("a", "b"):
        assert main(["solve", "--scenario", scenario, "--out", str(tmp_path / d), "--seed", "5"]) == 0
    assert (tmp_path / "a" / "manifest.txt").read_text() == (tmp_path / "b" / "manifest.txt").read_text()
    assert manifest(tmp_path / "a")["seed"] == "5"


def test_exit_codes(tmp_path, capsys):
    bad = tmp_path / "bad.ini"
    bad.write_text((DEMOS / "line.ini").read_text().replace("B = 1\n", ""))
    assert main(["solve", "--scenario", str(bad)]) == 2
    assert "'B'" in capsys.readouterr().err
    with pytest.raises(SystemExit) as info:
        main(["explode", "--scenario", str(bad)])
    assert info.value.code == 1
    assert main(["solve", "--scenario", str(tmp_path / "missing.ini")]) == 1
    assert main(["solve", "--scenario", str(DEMOS / "line.ini"), "--out", str(tmp_path),
                 "--inject-perturbation", "0.1"]) == 1
    slow = tmp_path / "slow.ini"
    slow.write_text((DEMOS / "taut_string.ini").read_text().replace("tol = 1e-8", "tol = 1e-8\nmax_iter = 2"))
    assert main(["solve", "--scenario", str(slow), "--out", str(tmp_path / "slow")]) == 3
    assert main(["verify", "--scenario", str(slow), "--out", str(tmp_path / "slow")]) == 3


def test_module_entry_point(tmp_path):
    out = subprocess.run([sys.executable, "-m", "obstreg", "solve", "--scenario", str(DEMOS / "line.ini"),
                          "--out", str(tmp_path)], capture_output=True, text=True)
    assert out.returncode == 0 and (tmp_path / "solution.csv").exists()
