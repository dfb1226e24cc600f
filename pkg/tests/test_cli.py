import csv
import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from polyrep.cli import example_report, main
from polyrep.gamefile import dump_report

GOLDEN = Path(__file__).parent / "golden"
FLOAT_ATOL = 1e-6


def run(argv, capsys):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def compare(got, want, path="$"):
    """Strings and other exact values must match; floats within FLOAT_ATOL."""
    if isinstance(want, dict):
        assert isinstance(got, dict) and got.keys() == want.keys(), path
        for k in want:
            compare(got[k], want[k], f"{path}.{k}")
    elif isinstance(want, list):
        assert isinstance(got, list) and len(got) == len(want), path
        for i, (g, w) in enumerate(zip(got, want)):
            compare(g, w, f"{path}[{i}]")
    elif isinstance(want, float) and not isinstance(want, bool):
        assert isinstance(got, (int, float)) and abs(got - want) <= FLOAT_ATOL, path
    else:
        assert got == want, path


@pytest.fixture(scope="module")
def reports():
    return {name: json.loads(dump_report(example_report(name))) for name in ("ex1", "ex2")}


@pytest.mark.parametrize("name", ["ex1", "ex2"])
def test_example_matches_golden(name, reports):
    compare(reports[name], json.loads((GOLDEN / f"{name}.json").read_text()))


def test_ex1_report_values(reports):
    r = reports["ex1"]
    assert r["poisson"]["B"] == [["0", "1", "-1/2"], ["-1", "0", "-3/2"], ["1/2", "3/2", "0"]]
    assert r["equilibrium_line"]["directions_model"] == [["6/5", "-4/9", "-1"]]
    assert r["reconstruction"]["payoff_matches"] and r["reconstruction"]["scaling"] == ["5/2", "9/4", "2"]
    assert r["integration"]["hamiltonian_drift"] <= 1e-8


def test_ex2_report_values(reports):
    r = reports["ex2"]
    assert r["equilibrium"]["q_model"] == ["-9/2", "8", "0"] and r["equilibrium"]["interior"] is False
    assert r["repellers"] == [["1", "0", "0"]] and r["sinks"] == [["0", "0", "1"]]
    assert r["integration"]["distance_to_sink"] <= 1e-3


def test_cli_example_is_deterministic(tmp_path):
    outs = []
    for k in range(2):
        path = tmp_path / f"r{k}.json"
        assert main(["example", "ex2", "--seed", "7", "--samples", "20", "-o", str(path)]) == 0
        outs.append(path.read_bytes())
    assert outs[0] == outs[1]


def test_info_and_exit_zero(capsys):
    code, out, _ = run(["info", "ex1"], capsys)
    assert code == 0
    data = json.loads(out)
    assert data["format"] == "v1" and data["signature"] == [2, 2, 2]


def test_exit_codes(tmp_path, capsys):
    bad_syntax = tmp_path / "a.game"
    bad_syntax.write_text("signature = [2\n")
    assert run(["info", str(bad_syntax)], capsys)[0] == 2
    assert run(["info", str(tmp_path / "missing.game")], capsys)[0] == 2
    bad_rows = tmp_path / "b.game"
    bad_rows.write_text("signature = [2, 2, 2]\npayoff = [[0, 0, 0, 0, 0]]\n")
    code, _, err = run(["info", str(bad_rows)], capsys)
    assert code == 3 and err.count("\n") == 1
    code, out, err = run(["equilibrium", "ex2", "--expect", "interior"], capsys)
    assert code == 4 and json.loads(out)["expectation_failed"]
    assert run(["equilibrium", "ex1", "--expect", "interior"], capsys)[0] == 0
    assert run(["conservative", "ex2", "--expect", "conservative"], capsys)[0] == 0


def test_not_conservative_is_a_verdict(tmp_path, capsys):
    path = tmp_path / "c.game"
    path.write_text("signature = [2, 2]\n"
                    "payoff = [[1, 0, 0, 0], [0, 0, 0, 0], [0, 0, 0, 0], [0, 0, 0, 0]]\n")
    code, out, _ = run(["conservative", str(path)], capsys)
    assert code == 0 and json.loads(out)["decomposition"]["conservative"] is False
    assert run(["conservative", str(path), "--expect", "conservative"], capsys)[0] == 4


def test_leaves_and_poisson_check(capsys):
    code, out, _ = run(["leaves", "ex2", "--point", "1/5,3/10,1/2,3/5,2/5"], capsys)
    data = json.loads(out)
    assert code == 0 and data["poisson"]["kernel"] == [["-1", "1/2", "1"]]
    code, out, _ = run(["poisson-check", "ex1", "--samples", "10", "--expect"], capsys)
    assert code == 0 and json.loads(out)["residuals"]["jacobi_exact"] == "0"


def test_integrate_conserves_hamiltonian(tmp_path):
    path = tmp_path / "traj.csv"
    assert main(["integrate", "ex1", "--seed", "3", "--t0", "0", "--t1", "100", "-o", str(path)]) == 0
    rows = list(csv.reader(path.open()))
    header, body = rows[0], np.array(rows[1:], dtype=float)
    assert header[:7] == ["t"] + [f"x_{i}" for i in range(1, 7)] and "H" in header and "c_1" in header
    H = body[:, header.index("H")]
    assert body[0, 0] == 0.0 and body[-1, 0] == 100.0
    assert abs(H[-1] - H[0]) <= 1e-8


def test_output_dir_override(tmp_path):
    env = {"POLYREP_OUTPUT_DIR": str(tmp_path), "PATH": "/usr/bin:/bin"}
    subprocess.run([sys.executable, "-m", "polyrep.cli", "info", "ex2", "-o", "sub/info.json"],
                   check=True, env=env)
    assert json.loads((tmp_path / "sub" / "info.json").read_text())["signature"] == [3, 2]
