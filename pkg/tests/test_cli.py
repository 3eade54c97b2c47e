import json
import os
from pathlib import Path

import numpy as np
import pytest

from ddecop.cli import EVAL_HEADER, main, parse_config_file
from ddecop.model import load_params
from ddecop.simulate import SyntheticSpec

TOY = str(Path(__file__).parent / "data" / "toy.csv")


def run(*args):
    return main([str(a) for a in args])


def test_fit_smoke_on_toy_table(tmp_path):
    out = tmp_path / "fit"
    code = run("fit", "--input", TOY, "--seed", 3, "--output-dir", out)
    assert code == 0
    params = load_params(out / "model.json")
    assert params.dims.observed_dim == 5
    doc = json.loads((out / "model.json").read_text())
    assert doc["schema"] == 1
    assert doc["meta"]["canonical"] is True
    trace = (out / "trace.csv").read_text().splitlines()
    assert trace[0].startswith("iteration,tau,gauss_loglik")
    assert (out / "report.txt").exists()


def test_fit_deterministic_bytes(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert run("fit", "--input", TOY, "--seed", 11, "--output-dir", a) == 0
    assert run("fit", "--input", TOY, "--seed", 11, "--output-dir", b) == 0
    assert (a / "model.json").read_bytes() == (b / "model.json").read_bytes()
    assert (a / "trace.csv").read_bytes() == (b / "trace.csv").read_bytes()


def test_fit_missing_input_exit_code(tmp_path, capsys):
    code = run("fit", "--input", tmp_path / "nope.csv", "--seed", 1, "--output-dir", tmp_path)
    assert code == 2
    assert "nope.csv" in capsys.readouterr().err


def test_simulate_preset_reproducible(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b):
        assert run(
            "simulate", "--preset", "desk", "--n", 120, "--seed", 5, "--output-dir", out
        ) == 0
    assert (a / "data.csv").read_bytes() == (b / "data.csv").read_bytes()
    assert (a / "truth.json").read_bytes() == (b / "truth.json").read_bytes()
    lines = (a / "data.csv").read_text().splitlines()
    assert len(lines) == 121  # header + n rows
    assert len(lines[0].split(",")) == 30


def test_simulate_invalid_preset(tmp_path, capsys):
    code = run("simulate", "--preset", "huge", "--seed", 1, "--output-dir", tmp_path)
    assert code == 2
    err = capsys.readouterr().err
    assert "desk" in err and "paper-J50" in err


def test_truth_json_round_trips(tmp_path):
    assert run(
        "simulate", "--preset", "desk", "--n", 100, "--seed", 8, "--output-dir", tmp_path
    ) == 0
    doc = json.loads((tmp_path / "truth.json").read_text())
    spec = SyntheticSpec.from_dict(doc)
    assert spec.params.dims.observed_dim == 30
    assert spec.n == 100


def test_sample_smoke_and_determinism(tmp_path):
    sim = tmp_path / "sim"
    fit = tmp_path / "fit"
    assert run("simulate", "--preset", "desk", "--n", 150, "--seed", 2, "--output-dir", sim) == 0
    assert run(
        "fit", "--input", sim / "data.csv", "--seed", 4, "--output-dir", fit,
        "--config", _fast_config(tmp_path),
    ) == 0
    a, b = tmp_path / "sa", tmp_path / "sb"
    for out in (a, b):
        assert run(
            "sample", "--model", fit / "model.json", "--input", sim / "data.csv",
            "--m", 80, "--seed", 7, "--output-dir", out,
        ) == 0
    assert (a / "synthetic.csv").read_bytes() == (b / "synthetic.csv").read_bytes()
    assert len((a / "synthetic.csv").read_text().splitlines()) == 81


def test_sample_schema_mismatch_named(tmp_path, capsys):
    model = tmp_path / "broken.json"
    model.write_text(json.dumps({"schema": 1, "dims": {"depth": 1}, "B": [], "gamma": [], "pi": []}))
    code = run("sample", "--model", model, "--input", TOY, "--seed", 1, "--output-dir", tmp_path)
    assert code == 1
    assert "meta" in capsys.readouterr().err


def _fast_config(tmp_path):
    cfg = tmp_path / "fit.cfg"
    cfg.write_text("max_iters = 30\nburn_in = 3\ndepth = 1\n")
    return cfg


def test_config_file_controls_fit(tmp_path):
    out = tmp_path / "fit"
    assert run(
        "fit", "--input", TOY, "--seed", 3, "--output-dir", out,
        "--config", _fast_config(tmp_path),
    ) == 0
    trace = (out / "trace.csv").read_text().splitlines()
    assert len(trace) == 31  # header + max_iters rows
    assert "k_star_1" in trace[0] and "k_star_2" not in trace[0]


def test_parse_config_rejects_unknown_keys(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("bogus = 1\n")
    with pytest.raises(Exception, match="bogus"):
        parse_config_file(cfg)


def test_parse_config_types(tmp_path):
    cfg = tmp_path / "ok.cfg"
    cfg.write_text("# comment\nmax_iters = 7\ntau0 = 0.85\nlambda1 = 0.02, 0.05\nvariant = exact-gibbs\n")
    out = parse_config_file(cfg)
    assert out == {
        "max_iters": 7, "tau0": 0.85, "lambda1": (0.02, 0.05), "variant": "exact-gibbs"
    }


def test_evaluate_truth_against_itself(tmp_path):
    sim = tmp_path / "sim"
    assert run("simulate", "--preset", "desk", "--n", 100, "--seed", 6, "--output-dir", sim) == 0
    # persist the truth's params as a model file, then evaluate against itself
    from ddecop.model import save_params

    doc = json.loads((sim / "truth.json").read_text())
    spec = SyntheticSpec.from_dict(doc)
    model = tmp_path / "estimate.json"
    save_params(spec.params, model)
    out = tmp_path / "eval"
    assert run(
        "evaluate", "--truth", sim / "truth.json", "--estimate", model,
        "--seed", 9, "--output-dir", out,
    ) == 0
    rows = (out / "evaluation.csv").read_text().splitlines()
    assert rows[0] == ",".join(EVAL_HEADER)
    for row in rows[1:]:
        fields = row.split(",")
        assert float(fields[1]) == 1.0
        assert float(fields[2]) < 1e-20


def test_evaluate_pmse_self_copy(tmp_path):
    sim = tmp_path / "sim"
    assert run("simulate", "--preset", "desk", "--n", 200, "--seed", 3, "--output-dir", sim) == 0
    out = tmp_path / "pmse"
    assert run(
        "evaluate", "--real", sim / "data.csv", "--synthetic", sim / "data.csv",
        "--seed", 12, "--output-dir", out,
    ) == 0
    score = float((out / "pmse.txt").read_text().split(":")[1])
    assert 0.0 <= score <= 0.05


def test_no_partial_outputs_on_failure(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("a,b\n1,2\n3,NA\n")
    out = tmp_path / "fit"
    code = run("fit", "--input", bad, "--seed", 1, "--output-dir", out)
    assert code == 1
    assert not (out / "model.json").exists()


def test_simulate_from_spec_file(tmp_path):
    sim_dir = tmp_path / "sim"
    assert run("simulate", "--preset", "desk", "--n", 60, "--seed", 2, "--output-dir", sim_dir) == 0
    out = tmp_path / "resim"
    assert run(
        "simulate", "--spec", sim_dir / "truth.json", "--n", 40, "--seed", 2, "--output-dir", out
    ) == 0
    lines = (out / "data.csv").read_text().splitlines()
    assert len(lines) == 41
