"""Command-line surface: exit codes, outputs, config precedence and replay."""

import json
import os

import pytest

from percolab.cli import main, replay_manifest
from percolab.io import read_manifest, read_results

BASE = ["--graph", "hypercubic", "--d", "2", "--seed", "5"]


def run(capsys, argv):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def manifests(d):
    return sorted(os.path.join(d, f) for f in os.listdir(d) if f.endswith(".manifest.json"))


def test_estimate_writes_rows_and_manifest(tmp_path, capsys):
    out = str(tmp_path / "o")
    code, stdout, _ = run(capsys, ["estimate", "--event", "E1", "--m", "2", "--n", "6", "--p", "0.5",
                                   "--budget", "2000", "--out", out] + BASE)
    assert code == 0
    (mpath,) = manifests(out)
    m = read_manifest(mpath)
    assert m.exit_code == 0 and m.seed == 5 and m.graph == {"family": "hypercubic", "d": 2, "k": 0}
    assert all(os.path.exists(f) for f in m.outputs)
    rows = read_results(os.path.join(out, "estimate.csv"))
    assert len(rows) == 1 and rows[0].run_id == m.run_id and rows[0].n_samples == 2000
    assert json.loads(stdout)["run_id"] == m.run_id


def test_missing_flag_is_usage_error(tmp_path, capsys):
    code, _, err = run(capsys, ["estimate", "--p", "0.5", "--out", str(tmp_path)])
    assert code == 1 and "usage:" in err and "--event" in err
    code, _, err = run(capsys, ["no-such-command"])
    assert code == 1 and "usage:" in err
    code, _, _ = run(capsys, ["estimate", "--p", "abc"])
    assert code == 1


def test_oracle_cap(tmp_path, capsys):
    # B(0,3) has 36 edges, above the enumeration cap
    code, _, err = run(capsys, ["oracle", "--event", "one-arm", "--n", "3", "--p", "0.5", "--out", str(tmp_path)])
    assert code == 1 and "capped at 24" in err
    code, _, _ = run(capsys, ["oracle", "--event", "one-arm", "--n", "2", "--p", "0.5", "--out", str(tmp_path)])
    assert code == 0


def test_starvation_exit_code(tmp_path, capsys):
    code, _, err = run(capsys, ["conditional", "--event", "E2", "--given", "E1", "--m", "2", "--n", "6",
                                "--p", "0.01", "--budget", "300", "--out", str(tmp_path)])
    assert code == 3 and "conditioning_starvation" in err
    assert read_manifest(manifests(str(tmp_path))[0]).exit_code == 3


def test_invariant_failure_exit_code(tmp_path, capsys):
    code, _, err = run(capsys, ["scales", "--m", "2", "--eps", "0.001", "--budget", "400", "--max-n", "16",
                                "--out", str(tmp_path)])
    assert code == 2 and "ScaleSearchError" in err


def test_config_precedence_and_env_seed(tmp_path, capsys, monkeypatch):
    cfg = tmp_path / "c.txt"
    cfg.write_text("event = E1\nm = 2\nn = 6\np = 0.5\nbudget = 1000\n")
    out = str(tmp_path / "o")
    monkeypatch.setenv("PERC_SEED", "41")
    assert run(capsys, ["estimate", "--config", str(cfg), "--budget", "1500", "--out", out])[0] == 0
    m = read_manifest(manifests(out)[0])
    assert m.parameters["budget"] == 1500 and m.parameters["n"] == 6 and m.seed == 41
    assert run(capsys, ["estimate", "--config", str(cfg), "--seed", "2", "--out", out])[0] == 0
    assert {read_manifest(p).seed for p in manifests(out)} == {41, 2}
    cfg.write_text("nonsense = 1\n")
    assert run(capsys, ["estimate", "--config", str(cfg), "--out", out])[0] == 1


@pytest.mark.parametrize("argv", [
    ["bk"],
    ["factorize", "--event", "edge", "--p", "0.5"],
    ["pc", "--n", "8", "--budget", "400"],
    ["census", "--m", "3", "--p", "0.5", "--budget", "200"],
    ["qm", "--m", "2", "--budget", "1000"],
    ["iic-first", "--n-list", "4,8", "--budget", "2000"],
    ["iic-second", "--proxy-n", "8", "--p-list", "0.6,0.55", "--budget", "2000"],
    ["slab-verify", "--graph", "slab", "--d", "3", "--k", "1", "--z", '{"box_annulus": [2, 4]}',
     "--x", "[[2, 0, 1]]", "--y", "[[4, 0, 1]]", "--budget", "20000"],
])
def test_subcommands_succeed(tmp_path, capsys, argv):
    out = str(tmp_path / "o")
    code, _, err = run(capsys, argv + ["--out", out])
    assert code == 0, err
    (mpath,) = manifests(out)
    m = read_manifest(mpath)
    assert m.exit_code == 0 and all(os.path.exists(f) for f in m.outputs)


def test_replay_reproduces_numeric_fields(tmp_path, capsys):
    base = str(tmp_path / "base")
    argv = ["iic-first", "--n-list", "6,12", "--p", "0.5", "--budget", "30000", "--target-accepted", "800",
            "--seed", "9", "--out", base]
    assert run(capsys, argv)[0] == 0
    (mpath,) = manifests(base)
    ref = read_results(os.path.join(base, "iic-first.csv"))
    for w in (1, 4):
        out = str(tmp_path / f"w{w}")
        assert replay_manifest(mpath, workers=w, out=out) == 0
        got = read_results(os.path.join(out, "iic-first.csv"))
        assert [r.numeric() for r in got] == [r.numeric() for r in ref]
        assert [r.run_id for r in got] == [r.run_id for r in ref]
    capsys.readouterr()


def test_suite_quick(tmp_path, capsys):
    code, out, _ = run(capsys, ["suite", "--quick", "--out", str(tmp_path)])
    assert code == 0
    assert out.count("PASS") == 3
