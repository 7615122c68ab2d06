import io
import os

import pytest

from spinobs.cli import main
from spinobs.config import parse_config
from spinobs.cli import schema_for
from spinobs.rational import ParseError


def run(argv, cwd):
    out, err = io.StringIO(), io.StringIO()
    old = os.getcwd()
    os.chdir(cwd)
    try:
        code = main(argv, out, err)
    finally:
        os.chdir(old)
    return code, out.getvalue(), err.getvalue()


@pytest.fixture
def work(tmp_path):
    (tmp_path / "k2.el").write_text("2 1\n0 1\n")
    (tmp_path / "c6.el").write_text("6 6\n0 1\n1 2\n2 3\n3 4\n4 5\n5 0\n")
    (tmp_path / "k33.el").write_text("6 9\n0 3\n0 4\n0 5\n1 3\n1 4\n1 5\n2 3\n2 4\n2 5\n")
    return tmp_path


def kv(text):
    return dict(line.split("=", 1) for line in text.splitlines() if "=" in line)


def test_critical_potts(work):
    code, out, _ = run(["critical", "potts", "--q", "3", "--delta", "3"], work)
    assert code == 0 and kv(out)["beta_c"].startswith("3.8473")


def test_exact_susceptibility(work):
    code, out, _ = run(["exact", "--model", "potts", "--q", "3", "--beta", "2", "--graph", "k2.el", "--observable", "susceptibility"], work)
    assert (code, out) == (0, "1/2\n")


def test_malformed_rational(work, capsys):
    code, _, _ = run(["exact", "--q", "3", "--beta", "2//3", "--graph", "k2.el"], work)
    err = capsys.readouterr().err
    assert code == 2 and "argument --beta: malformed rational '2//3'" in err


def test_exit_codes(work):
    assert run(["critical", "potts", "--q", "3", "--delta", "3", "--beta", "2"], work)[0] == 2
    assert run(["exact", "--q", "3", "--beta", "2", "--graph", "missing.el"], work)[0] == 2
    assert run(["--budget", "10", "exact", "--q", "3", "--beta", "2", "--graph", "k33.el", "--method", "enumerate"], work)[0] == 3
    assert run(["interpolate", "--q", "3", "--graph", "k2.el", "--target", "2", "--eps", "1/1000", "--mode", "paper"], work)[0] == 3
    assert run(["gadget", "pair", "--q", "3", "--beta", "2", "--r", "1/100", "--gap-min", "1/2", "--max-depth", "1"], work)[0] == 4
    assert run(["critical", "twospin", "--beta", "1", "--gamma", "0", "--lambda", "1", "--delta", "3"], work)[0] == 0


def test_csv_schema(work):
    code, _, _ = run(["gadget", "build-path", "--q", "3", "--beta", "2", "--r", "1/100", "--csv", "p.csv"], work)
    lines = (work / "p.csv").read_text().splitlines()
    assert code == 0 and lines[0] == "ell,edges,B,excess,kappa_bound,ratio,predicted_ratio"
    assert lines[2].split(",")[2] == "22/21"
    run(["interpolate", "--q", "3", "--graph", "k2.el", "--target", "2", "--grid", "10", "--csv", "i.csv"], work)
    row = (work / "i.csv").read_text().splitlines()[1].split(",")
    assert len(row[3].replace("-", "").replace(".", "").lstrip("0").rstrip("0")) <= 17 and "e" not in row[1]


def test_reduce_writes_plan_and_verifies(work):
    code, out, _ = run(["reduce", "potts", "--graph", "k33.el", "--target", "21/20", "--base", "q=3,beta=4",
                        "--plan-out", "plan.txt", "--csv", "r.csv", "--verify"], work)
    vals = kv(out)
    assert code == 0 and vals["ell"] == "9" and vals["verify_abs_error"] == "0" and vals["verify_phase_deviation"] == "0"
    assert (work / "plan.txt").read_text().startswith("kind=potts\n")
    again = run(["reduce", "potts", "--graph", "k33.el", "--target", "21/20", "--base", "q=3,beta=4", "--plan-out", "plan2.txt"], work)
    assert again[0] == 0 and (work / "plan.txt").read_bytes() == (work / "plan2.txt").read_bytes()


@pytest.mark.parametrize("argv", [
    ["interpolate", "--q", "3", "--graph", "c6.el", "--target", "2", "--grid", "50", "--oracle", "mc:samples=300", "--csv", "o/a.csv", "--figure", "o/a.png"],
    ["sample", "--model", "hardcore", "--graph", "c6.el", "--steps", "3000", "--chains", "2", "--csv", "o/a.csv"],
    ["phase", "sample", "--n", "3", "--t", "2", "--delta", "3", "--seed", "9", "-o", "o/a.el"],
    ["gadget", "build", "--model", "hardcore", "--t", "4", "--csv", "o/a.csv", "--figure", "o/a.png"],
])
def test_replay_is_byte_identical(work, argv):
    (work / "o").mkdir()
    code, out1, _ = run(["--seed", "3", "--replay", "rep.txt"] + argv, work)
    assert code == 0
    first = {p.name: p.read_bytes() for p in (work / "o").iterdir()}
    for p in (work / "o").iterdir():
        p.unlink()
    code, out2, _ = run(["replay", "rep.txt"], work)
    assert code == 0 and out1 == out2
    assert {p.name: p.read_bytes() for p in (work / "o").iterdir()} == first


def test_config_validation(work):
    (work / "bad.txt").write_text("command = exact\nq = 3\n\nfrobnicate = 1\n")
    code, _, err = run(["run", "bad.txt"], work)
    assert code == 2 and "bad.txt:4" in err and "frobnicate" in err
    with pytest.raises(ParseError, match="cfg:2"):
        parse_config("command = critical potts\nbeta = 2//3\n", schema_for, "cfg")
    with pytest.raises(ParseError, match="cfg:1"):
        parse_config("command = critical teapot\n", schema_for, "cfg")
    with pytest.raises(ParseError, match="does not exist"):
        parse_config("command = exact\ngraph = nowhere.el\n", schema_for, "cfg", str(work))


def test_config_runs(work):
    (work / "c.txt").write_text("# comment\ncommand = exact\nmodel = hardcore\ngraph = k2.el\nobservable = magnetization\n")
    code, out, _ = run(["run", "c.txt"], work)
    assert (code, out) == (0, "2/3\n")


def test_gadget_stats_and_phase_assess(work):
    code, out, _ = run(["gadget", "stats", "--q", "3", "--beta", "2", "--expr", "a = path 3; b = composeE(edge, edge)", "--verify"], work)
    assert code == 0 and kv(out)["a.B"] == "22/21" and kv(out)["b.B"] == "34/31"
    run(["phase", "sample", "--n", "2", "--t", "1", "--delta", "3", "--seed", "5", "-o", "g.el"], work)
    code, out, _ = run(["phase", "assess", "--graph", "g.el", "--q", "3", "--beta", "4"], work)
    assert code == 0 and kv(out)["eps_balance"] == "0"
