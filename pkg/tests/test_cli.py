import json

import pytest

from gtimex.cli import main


def test_check_scheme(capsys):
    assert main(["check-scheme", "GSA342"]) == 0
    out = capsys.readouterr().out
    assert "type A: True" in out and "ISA: True" in out and "GSA: True" in out and "order 2: True" in out
    assert main(["check-scheme", "SSP2332"]) == 0
    assert "GSA: False" in capsys.readouterr().out


def test_check_scheme_from_file(tmp_path, capsys):
    spec = {
        "name": "euler",
        "explicit": {"A": [["0"]], "b": ["1"]},
        "implicit": {"A": [["1"]], "b": ["1"]},
    }
    path = tmp_path / "pair.json"
    path.write_text(json.dumps(spec))
    assert main(["check-scheme", str(path)]) == 0
    assert "order 2: False" in capsys.readouterr().out


def test_unknown_scheme_fails(capsys):
    assert main(["check-scheme", "RK4"]) == 2
    assert "available" in capsys.readouterr().err


def test_missing_config_writes_nothing(tmp_path, capsys):
    out = tmp_path / "out"
    assert main(["forward", "--config", str(tmp_path / "nope.json"), "--out", str(out)]) != 0
    assert "nope.json" in capsys.readouterr().err
    assert not out.exists()


def test_bad_key_reported(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"eps": 2.0}))
    assert main(["optimize", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2
    err = capsys.readouterr().err
    assert "c.json" in err and "'eps'" in err and "usage" in err


def test_forward_outputs(tmp_path):
    out = tmp_path / "f"
    assert main(["forward", "--control", "exact", "--out", str(out)]) == 0
    assert {p.name for p in out.iterdir()} == {"state.csv", "control.csv", "summary.txt", "state.png"}
    lines = (out / "state.csv").read_text().splitlines()
    assert lines[0].startswith("# gtimex")
    assert "n,t,x,rho,j" in lines


def test_optimize_outputs(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"eps": 0.5, "nu": 0.001, "n_steps": 20, "cells": 10, "problem": "tracking",
                               "t_final": 1.0, "experiment": {"max_iter": 500}}))
    out = tmp_path / "o"
    assert main(["optimize", "--config", str(cfg), "--out", str(out), "--no-plots"]) == 0
    names = {p.name for p in out.iterdir()}
    assert names == {"control.csv", "state.csv", "adjoint.csv", "trace.csv", "summary.txt"}
    assert "converged = True" in (out / "summary.txt").read_text()


def test_order_study_is_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b):
        assert main(["order-study", "--scheme", "SSP2332", "--steps", "10,20", "--out", str(out), "--no-plots"]) == 0
    assert (a / "order.csv").read_bytes() == (b / "order.csv").read_bytes()
    text = (a / "order.csv").read_text()
    assert "scheme,n_steps,err_rho_L1" in text and "SSP2332,20," in text


def test_benchmark_and_ce(tmp_path):
    out = tmp_path / "b"
    args = ["benchmark", "--scheme", "GSA342,SSP2332", "--eps", "0.1,1", "--steps", "40", "--cells", "20", "--out", str(out)]
    assert main(args) == 0
    text = (out / "benchmark.csv").read_text()
    assert "SSP2332,0.1" in text and "unstable" in text
    assert (out / "benchmark_control.png").stat().st_size > 0
    assert main(["ce-verify", "--eps", "0.02,0.01", "--out", str(tmp_path / "c")]) == 0
    assert (tmp_path / "c" / "ce.csv").exists()


def test_bad_lists_are_usage_errors(tmp_path):
    with pytest.raises(SystemExit):
        main(["benchmark", "--eps", "a,b", "--out", str(tmp_path)])
    assert main(["order-study", "--workers", "0", "--out", str(tmp_path / "w")]) == 2
