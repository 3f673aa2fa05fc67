import json

import numpy as np
import pytest
import yaml

from specprune import cli
from specprune.sparse_format import load_kernels, save_kernels
from conftest import REPO

QUICK = str(REPO / "configs" / "synthetic_quick.yaml")


def run(*argv):
    return cli.main([str(a) for a in argv])


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    out = tmp_path_factory.mktemp("quick")
    assert run("train-baseline", "--config", QUICK, "--out", out) == 0
    assert run("prune", "--config", QUICK, "--out", out) == 0
    return out


def test_pipeline_outputs(pipeline):
    for name in ("model.npz", "train_log.csv", "kernels.spk", "pruned_model.npz", "prune_log.csv",
                 "metrics.json", "config.resolved.yaml"):
        assert (pipeline / name).exists(), name
    metrics = json.loads((pipeline / "metrics.json").read_text())
    assert metrics["k"] == 16 and metrics["z_exact_k"] and metrics["problems"] == []
    assert metrics["accuracy"]["original"] > 0.6
    layers = load_kernels(pipeline / "kernels.spk")
    assert [ks.k for ks in layers] == [16, 16]


def test_simulate_and_explore(pipeline, tmp_path):
    assert run("simulate", "--config", QUICK, "--out", pipeline) == 0
    report = json.loads((pipeline / "sim_report.json").read_text())
    assert report["problems"] == []
    assert all(l["cycles"] == l["analytic_cycles"] for l in report["layers"])
    assert (pipeline / "tables.spt").stat().st_size > 0
    assert run("explore", "--config", QUICK, "--out", tmp_path, "--table", pipeline / "sweep.csv",
               "--workload", "lenet-toy") == 0
    opt = json.loads((tmp_path / "optimum.json").read_text())
    assert opt["P_o"] in (4, 8) and opt["workload"]
    assert (tmp_path / "frontier.csv").exists()


def test_resolved_config_snapshot(tmp_path):
    assert run("train-baseline", "--config", QUICK, "--out", tmp_path, "--epochs", "0", "--seed", "11") == 0
    snap = yaml.safe_load((tmp_path / "config.resolved.yaml").read_text())
    assert snap["command"] == "train-baseline"
    assert snap["seed"] == 11 and snap["baseline"]["epochs"] == 0
    assert snap["data"]["source"] == "synthetic" and snap["admm"]["iterations"] == 4


def test_zero_epoch_baseline_is_chance(tmp_path):
    assert run("train-baseline", "--config", QUICK, "--out", tmp_path, "--epochs", "0") == 0
    acc = json.loads((tmp_path / "metrics.json").read_text())["test_accuracy"]
    assert 0.0 <= acc <= 0.3


def test_same_seed_same_bytes(tmp_path):
    for d in ("a", "b"):
        assert run("train-baseline", "--config", QUICK, "--out", tmp_path / d, "--epochs", "2") == 0
    for name in ("metrics.json", "train_log.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    assert run("train-baseline", "--config", QUICK, "--out", tmp_path / "c", "--epochs", "2", "--seed", "4") == 0
    assert (tmp_path / "a" / "train_log.csv").read_bytes() != (tmp_path / "c" / "train_log.csv").read_bytes()


@pytest.mark.parametrize("argv", [
    ["prune", "--model", "does/not/exist.npz"],
    ["simulate", "--kernels", "missing.spk"],
    ["train-baseline", "--seed", "-1"],
    ["train-baseline", "--threads", "0"],
    ["train-baseline", "--data", "no/such/dir"],
    ["explore", "--table", "missing.csv"],
])
def test_usage_errors_exit_2(tmp_path, argv, capsys):
    assert run(*argv, "--out", tmp_path) == 2
    assert "error:" in capsys.readouterr().err


def test_unknown_config_key_exits_2(tmp_path):
    bad = tmp_path / "bad.yaml"
    bad.write_text("admm:\n  rhoo: 0.1\n")
    assert run("verify", "--config", bad, "--out", tmp_path) == 2


def test_argparse_rejects_unknown_command():
    with pytest.raises(SystemExit) as exc:
        run("frobnicate")
    assert exc.value.code == 2


def test_simulate_rejects_bad_hardware(pipeline, tmp_path):
    assert run("simulate", "--config", QUICK, "--out", tmp_path, "--kernels", pipeline / "kernels.spk",
               "--R", "16") == 2


@pytest.mark.parametrize("seed", [0, 7, 123])
def test_verify_passes(tmp_path, seed):
    assert run("verify", "--out", tmp_path, "--seed", seed) == 0
    rows = json.loads((tmp_path / "verify.json").read_text())
    assert len(rows) == 4 and all(r["pass"] for r in rows)


def test_verify_tol_override(tmp_path, capsys):
    # round-off errors are around 1e-16, so a zero tolerance must trip the numeric checks
    assert run("verify", "--out", tmp_path, "--tol", "0") == 1
    rows = json.loads((tmp_path / "verify.json").read_text())
    assert {r["check"]: r["tolerance"] for r in rows}["spectral vs spatial conv"] == "0e+00"
    assert not all(r["pass"] for r in rows)
    assert "FAIL" in capsys.readouterr().out


def test_verify_locates_corrupted_kernel(pipeline, tmp_path, capsys):
    layers = load_kernels(pipeline / "kernels.spk")
    layers[1].indices[2, 3, [0, 1]] = layers[1].indices[2, 3, [1, 0]]  # break ascending order
    bad = tmp_path / "bad.spk"
    save_kernels(bad, layers)
    assert run("verify", "--out", tmp_path, "--kernels", bad) == 1
    out = capsys.readouterr().out
    assert "layer 1" in out and "j=2, i=3" in out and "strictly increasing" in out

    raw = (pipeline / "kernels.spk").read_bytes()
    (tmp_path / "short.spk").write_bytes(raw[:-5])
    assert run("verify", "--out", tmp_path, "--kernels", tmp_path / "short.spk") == 1
    assert "layer 1 records" in capsys.readouterr().out


def test_simulate_corrupted_kernel_exits_1(pipeline, tmp_path):
    layers = load_kernels(pipeline / "kernels.spk")
    layers[0].values[0, 0, 0] = np.nan
    save_kernels(tmp_path / "nan.spk", layers)
    assert run("simulate", "--config", QUICK, "--out", tmp_path, "--kernels", tmp_path / "nan.spk") == 1
