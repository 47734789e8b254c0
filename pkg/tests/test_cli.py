import json
import subprocess
import sys
from pathlib import Path

import pytest

from graphlet_gibbs.cli import run

GRAPHS = Path(__file__).resolve().parent.parent / "graphs"


def cli(*args, env=None):
    proc = subprocess.run([sys.executable, "-m", "graphlet_gibbs", *args], capture_output=True, text=True, env=env)
    return proc.returncode, proc.stdout, proc.stderr


def g(name):
    return str(GRAPHS / name)


def test_sample_rooted_records_and_replay():
    args = ["sample-rooted", "--graph", g("star.g"), "--root", "0", "--lambda", "1/5", "--samples", "3", "--seed", "7"]
    code, out, err = cli(*args)
    assert code == 0 and "seed=7" in err
    recs = [json.loads(line) for line in out.splitlines()]
    assert len(recs) == 3
    for r in recs:
        assert set(r) == {"vertices", "size", "iterations"}
        assert r["vertices"] == sorted(r["vertices"]) and 0 in r["vertices"]
    assert cli(*args)[1] == out


def test_refusal_names_threshold():
    code, out, err = cli("sample-rooted", "--graph", g("star.g"), "--root", "0", "--lambda", "1/4", "--seed", "1")
    assert code == 2 and "lambda*(3,1) = 1/4" in err and out == ""


def test_colors_field_only_when_labelled():
    code, out, _ = cli("sample-rooted", "--graph", g("p3.g"), "--root", "1", "--lambda", "1/10", "--colors", "2",
                       "--samples", "2", "--seed", "3")
    assert code == 0
    for line in out.splitlines():
        r = json.loads(line)
        assert len(r["colors"]) == len(r["vertices"]) and set(r["colors"]) <= {1, 2}


def test_validation_errors_exit_one():
    assert cli("sample-rooted", "--graph", g("nope.g"), "--root", "0", "--lambda", "1/5")[0] == 1
    assert cli("sample-rooted", "--graph", g("star.g"), "--root", "0", "--lambda", "0.1.2")[0] == 1
    assert cli("sample-rooted", "--graph", g("star.g"), "--root", "9", "--lambda", "1/5")[0] == 1
    assert cli("frobnicate")[0] == 1
    assert cli("sample-hardcore", "--graph", g("p3.g"), "--lambda", "1/10", "--seed", "1")[0] == 1


def test_seed_from_environment():
    import os
    env = dict(os.environ, GRAPHLET_GIBBS_SEED="123")
    a = cli("sample-unrooted", "--graph", g("star.g"), "--lambda", "1/10", "--samples", "4", env=env)
    b = cli("sample-unrooted", "--graph", g("star.g"), "--lambda", "1/10", "--samples", "4", "--seed", "123")
    assert a[0] == 0 and a[1] == b[1] and "seed=123" in a[2]


def test_entropy_seed_is_echoed(capsys):
    import io
    out, err = io.StringIO(), io.StringIO()
    assert run(["sample-unrooted", "--graph", g("p3.g"), "--lambda", "1/10"], out, err) == 0
    seed = int(err.getvalue().split()[0].split("=")[1])
    out2 = io.StringIO()
    run(["sample-unrooted", "--graph", g("p3.g"), "--lambda", "1/10", "--seed", str(seed)], out2, io.StringIO())
    assert out2.getvalue() == out.getvalue()


def test_polymer_hardcore_potts_commands():
    code, out, _ = cli("sample-polymer", "--graph", g("p3.g"), "--lambda", "1/10", "--samples", "3", "--seed", "5")
    assert code == 0 and all("polymers" in json.loads(x) for x in out.splitlines())
    code, _, err = cli("sample-polymer", "--graph", g("star.g"), "--lambda", "1/5", "--colors", "2", "--seed", "5")
    assert code == 2 and "1/8" in err
    code, out, _ = cli("sample-hardcore", "--graph", g("c4_bipartite.g"), "--lambda", "1/10", "--samples", "5", "--seed", "5")
    assert code == 0 and len(out.splitlines()) == 5
    code, out, _ = cli("sample-potts", "--graph", g("k4.g"), "--colors", "2", "--beta", "3/2", "--alpha", "2",
                       "--samples", "5", "--seed", "5")
    recs = [json.loads(x) for x in out.splitlines()]
    assert code == 0 and all(len(r["colors"]) == 4 and "j" in r for r in recs)
    code, _, err = cli("sample-potts", "--graph", g("k4.g"), "--colors", "2", "--beta", "12/5", "--alpha", "1", "--seed", "5")
    assert code == 2


def test_check_reports():
    code, out, _ = cli("check", "--graph", g("p3.g"), "--lambda", "1/10", "--theta", "9/10")
    rep = json.loads(out)
    assert code == 0 and rep["contraction"]["max_sum"] == "343/1000"
    code, out, _ = cli("check", "--graph", g("k4.g"), "--model", "potts", "--colors", "2", "--beta", "12/5", "--alpha", "1")
    assert code == 2 and json.loads(out)["pass"] is False
    code, out, _ = cli("check", "--graph", g("c4_bipartite.g"), "--model", "hardcore", "--lambda", "1/10")
    assert code == 0 and json.loads(out)["condition"] == "unbalanced-bipartite"
    code, out, _ = cli("check", "--graph", g("star.g"), "--lambda", "1/4")
    assert code == 2 and json.loads(out)["weight_cap"]["pass"] is False


def test_verify_subtrees():
    code, out, _ = cli("verify", "--suite", "subtrees", "--seed", "1")
    reps = [json.loads(x) for x in out.splitlines()]
    assert code == 0 and len(reps) == 21
    assert all({"test", "n_samples", "tv", "threshold", "pass"} <= set(r) for r in reps)


def test_estimate_z():
    code, out, _ = cli("estimate-z", "--graph", g("p3.g"), "--root", "0", "--lambda", "1/10", "--eps", "1/2",
                       "--delta", "1/2", "--seed", "3")
    rep = json.loads(out)
    assert code == 0 and rep["z_estimate"] == pytest.approx(1.111, rel=0.1)
