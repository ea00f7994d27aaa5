import json
import subprocess
import sys

import numpy as np
import pytest

from finslerlab.cli import run_cli, to_json

COMMANDS = [
    ["eval", "--metric", "euclid2.fm", "--point", "x=0,0;y=1,0", "--tensor", "all"],
    ["eval", "--example", "conic_randers_lift", "--point", "x=1,0.3,1;y=0.2,0.5,1",
     "--point", "x=1,0.3,1;y=1,0,0", "--tensor", "all"],
    ["classify", "--example", "randers2d", "--xsamples", "6", "--seed", "3"],
    ["scfind", "--metric", "ex5_2", "--x", "1,1,1,1", "--ysamples", "40", "--seed", "0"],
    ["scfind", "--example", "conic_randers_lift", "--xsamples", "3", "--seed", "2"],
    ["check", "--example", "conic_randers_lift", "--field", "0;0;-x3", "--kind", "c", "--xsamples", "5"],
    ["check", "--example", "ex5_2", "--potential", "x2", "--kind", "f", "--xsamples", "5"],
    ["verify", "--example", "product3d", "--xsamples", "10"],
    ["catalog-list"],
]


def _run(argv, tmp_path, name):
    out = tmp_path / name
    code = run_cli(argv + ["--out", str(out)])
    return code, out.read_bytes()


@pytest.mark.parametrize("argv", COMMANDS, ids=lambda a: a[0])
def test_same_seed_gives_identical_bytes(argv, tmp_path):
    c1, b1 = _run(argv, tmp_path, "a.json")
    c2, b2 = _run(argv, tmp_path, "b.json")
    assert c1 == c2 == 0
    assert b1 == b2
    doc = json.loads(b1)
    assert list(doc) == ["command", "config_echo", "results", "tool_version", "verdicts"]


def test_stdout_matches_out_file(tmp_path, capsys):
    argv = ["classify", "--example", "randers2d", "--xsamples", "3"]
    assert run_cli(argv) == 0
    printed = capsys.readouterr().out
    _, written = _run(argv, tmp_path, "c.json")
    assert printed.encode() == written


def test_subprocess_runs_are_identical():
    argv = [sys.executable, "-m", "finslerlab.cli", "scfind", "--example", "ex5_3", "--xsamples", "2"]
    a = subprocess.run(argv, capture_output=True, check=True).stdout
    b = subprocess.run(argv, capture_output=True, check=True).stdout
    assert a == b and b'"consistent_dimension": 1' in a


def test_eval_euclidean_cartan_is_zero(capsys):
    assert run_cli(["eval", "--metric", "euclid2.fm", "--point", "x=0,0;y=1,0", "--tensor", "cartan"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert np.all(np.array(doc["results"]["points"][0]["values"]["cartan"]) == 0)


def test_scfind_ex5_2_contains_e2(capsys):
    run_cli(["scfind", "--metric", "ex5_2", "--x", "1,1,1,1", "--ysamples", "40"])
    doc = json.loads(capsys.readouterr().out)
    basis = np.array(doc["results"]["nullspaces"][0]["basis"])
    assert np.linalg.norm(basis @ np.array([0, 1, 0, 0])) == pytest.approx(1.0)


def test_verify_conic_exit_zero(capsys):
    assert run_cli(["verify", "--example", "conic_randers_lift", "--tol", "1e-7", "--format", "json"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["verdicts"]["passed"] is True


def test_failed_check_exits_one(capsys):
    code = run_cli(["check", "--example", "conic_randers_lift", "--field", "0;0;x3", "--kind", "c",
                    "--xsamples", "3"])
    assert code == 1
    assert json.loads(capsys.readouterr().out)["verdicts"] == {"C": False}


def test_point_outside_domain_exits_one(capsys):
    code = run_cli(["eval", "--example", "conic_randers_lift", "--point", "x=1,1,1;y=0,0,1"])
    assert code == 1
    assert "DomainViolation" in capsys.readouterr().out


@pytest.mark.parametrize("argv", [
    ["frobnicate"],
    ["eval", "--metric", "euclid2.fm", "--bogus"],
    ["eval", "--metric", "euclid2.fm"],
    ["eval", "--metric", "euclid2.fm", "--point", "x=0;y=1,0"],
    ["eval", "--metric", "euclid2.fm", "--example", "ex5_1", "--point", "x=0,0;y=1,0"],
    ["eval", "--metric", "no_such_metric", "--point", "x=0,0;y=1,0"],
    ["check", "--example", "ex5_1", "--field", "0;0;0;1"],
    ["verify", "--metric", "euclid2.fm"],
    ["classify", "--example", "ex5_1", "--param", "Z9=1"],
])
def test_usage_errors_exit_two(argv, capsys):
    assert run_cli(argv) == 2
    assert "usage" in capsys.readouterr().err


def test_metric_file_syntax_error_exits_two(tmp_path, capsys):
    bad = tmp_path / "bad.fm"
    bad.write_text("dim = 2\nenergy = y1^2 +\n")
    assert run_cli(["eval", "--metric", str(bad), "--point", "x=0,0;y=1,0"]) == 2


def test_text_format(capsys):
    assert run_cli(["classify", "--example", "euclidean_n", "--xsamples", "2", "--format", "text"]) == 0
    out = capsys.readouterr().out
    assert "verdicts.riemannian: member" in out


def test_json_number_format():
    assert to_json({"b": 0.1, "a": [float("nan"), float("inf"), -float("inf"), 3, True, None]}) == (
        '{"a": ["nan", "inf", "-inf", 3, true, null], "b": 0.10000000000000001}')
