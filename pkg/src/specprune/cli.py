"""Command-line entry point: specprune {train-baseline,prune,simulate,explore,verify}.

Every command writes its outputs plus ``config.resolved.yaml`` into ``--out``.
Exit codes: 0 success, 1 validation or verification failure, 2 usage or config error.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import os
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from . import accel_sim, admm, dse
from . import spectral_core as sc
from . import toy_model as tm
from .mnist import Dataset, DatasetError, load_mnist, synthetic_digits
from .sparse_format import (
    FormatError,
    keep_count,
    lambda_stats,
    load_kernels,
    project_topk,
    save_kernels,
    serialize_tables,
)

log = logging.getLogger("specprune")

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
REPO_ROOT = Path(__file__).resolve().parents[2]  # relative data paths fall back to the checkout


class ConfigError(ValueError):
    pass


# -- configuration ----------------------------------------------------------------


@dataclass
class DataConfig:
    source: str = "mnist"  # or "synthetic"
    path: str = "data/mnist-1k"
    train_limit: int | None = None
    test_limit: int | None = None
    synthetic_train: int = 500
    synthetic_test: int = 500


@dataclass
class BaselineConfig:
    epochs: int = 20
    lr: float = 0.1
    spectral_init: str = "fft"


@dataclass
class PruneConfig:
    model: str | None = None  # default: <out>/model.npz


@dataclass
class SimulateConfig:
    kernels: str | None = None  # default: <out>/kernels.spk
    P_b: int = 1
    P_o: int = 16
    R: int = 2
    c: int = 16
    batch: int = 1
    P_o_grid: list[int] = field(default_factory=lambda: [4, 8, 16])
    R_grid: list[int] = field(default_factory=lambda: [1, 2, 4, 8, 16])


@dataclass
class PlatformConfig:
    s_dsp: int = 3600
    s_bram: int = 1470
    bandwidth_bytes_per_s: float = 21e9
    freq_hz: float = 200e6

    def build(self) -> dse.PlatformSpec:
        return dse.PlatformSpec.from_bytes_per_second(self.s_dsp, self.s_bram, self.bandwidth_bytes_per_s, self.freq_hz)


@dataclass
class ExploreConfig:
    platform: PlatformConfig = field(default_factory=PlatformConfig)
    workload: str = "vgg16"
    n: int = 8
    alpha: float = 4.0
    P_b: int | None = 10  # null searches every batch parallelism
    P_o_grid: list[int] | None = None  # default: powers of two up to S_DSP
    R_grid: list[int] | None = None  # default: whatever the table holds
    table: str | None = None  # CSV with P_o,R,alpha,utilization (e.g. sweep.csv)
    entries: list[dict] | None = None  # inline rows, same keys as the CSV
    random_channels: int = 64  # input channels of the random-mask fallback table


@dataclass
class VerifyConfig:
    conv_trials: int = 50
    conv_tol: float = 1e-6
    sim_trials: int = 20
    sim_tol: float = 1e-9
    projection_trials: int = 200
    grad_tol: float = 1e-4
    grad_entries: int = 12
    kernels: str | None = None


@dataclass
class ExperimentConfig:
    seed: int = 7
    out: str = "runs/default"
    threads: int = 1
    data: DataConfig = field(default_factory=DataConfig)
    model: dict = field(default_factory=dict)  # ToyModelSpec overrides
    baseline: BaselineConfig = field(default_factory=BaselineConfig)
    admm: admm.AdmmConfig = field(default_factory=admm.AdmmConfig)
    prune: PruneConfig = field(default_factory=PruneConfig)
    simulate: SimulateConfig = field(default_factory=SimulateConfig)
    explore: ExploreConfig = field(default_factory=ExploreConfig)
    verify: VerifyConfig = field(default_factory=VerifyConfig)

    def model_spec(self) -> tm.ToyModelSpec:
        base = dataclasses.asdict(tm.SYNTHETIC_TOY if self.data.source == "synthetic" else tm.MNIST_TOY)
        unknown = set(self.model) - set(base)
        if unknown:
            raise ConfigError(f"unknown model keys: {sorted(unknown)}")
        base.update(self.model)
        base["channels"] = tuple(base["channels"])
        try:
            return tm.ToyModelSpec(**base)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad model config: {exc}") from exc


def _merge(obj, updates: dict, where: str):
    if not isinstance(updates, dict):
        raise ConfigError(f"{where or 'config'}: expected a mapping, got {type(updates).__name__}")
    names = {f.name: f for f in dataclasses.fields(obj)}
    for key, value in updates.items():
        if key not in names:
            raise ConfigError(f"unknown config key {where + key!r}")
        current = getattr(obj, key)
        if dataclasses.is_dataclass(current):
            _merge(current, value, f"{where}{key}.")
        else:
            setattr(obj, key, value)
    return obj


def load_config(path: str | None) -> ExperimentConfig:
    cfg = ExperimentConfig()
    if path is None:
        return cfg
    try:
        with open(path) as fh:
            raw = yaml.safe_load(fh) or {}
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"config {path} is not valid YAML: {exc}") from exc
    return _merge(cfg, raw, "")


def write_resolved(cfg: ExperimentConfig, out: Path, command: str) -> None:
    snap = {"command": command, **dataclasses.asdict(cfg)}
    with open(out / "config.resolved.yaml", "w") as fh:
        yaml.safe_dump(snap, fh, sort_keys=False)


def _write_json(path: Path, obj) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_data(cfg: ExperimentConfig) -> tuple[Dataset, Dataset]:
    d = cfg.data
    if d.source == "synthetic":
        spec = cfg.model_spec()
        train = synthetic_digits(d.synthetic_train, spec.image_size, spec.num_classes, seed=cfg.seed)
        test = synthetic_digits(d.synthetic_test, spec.image_size, spec.num_classes, seed=cfg.seed + 1)
        return train, test
    if d.source != "mnist":
        raise ConfigError(f"data.source must be 'mnist' or 'synthetic', got {d.source!r}")
    path = Path(d.path)
    if not path.is_dir() and not path.is_absolute() and (REPO_ROOT / path).is_dir():
        path = REPO_ROOT / path
    if not path.is_dir():
        raise ConfigError(f"dataset directory {d.path} does not exist")
    return load_mnist(path, "train", d.train_limit), load_mnist(path, "test", d.test_limit)


# -- commands ----------------------------------------------------------------------


def cmd_train_baseline(cfg: ExperimentConfig, out: Path) -> int:
    spec = cfg.model_spec()
    train, test = load_data(cfg)
    rng = np.random.default_rng(cfg.seed)
    params = tm.init_params(spec, rng, cfg.baseline.spectral_init)
    rows = []
    for epoch in range(cfg.baseline.epochs):
        lr = admm._lr_at(cfg.baseline.lr, epoch, cfg.admm)
        loss = admm.sgd_epoch(spec, params, train, lr, cfg.admm.batch_size, rng)
        acc = tm.accuracy(spec, params, test.x, test.y)
        rows.append({"epoch": epoch + 1, "loss": loss, "accuracy": acc})
        log.info("epoch %d  loss %.4f  acc %.4f", epoch + 1, loss, acc)
    acc = tm.accuracy(spec, params, test.x, test.y)
    tm.save_model(out / "model.npz", spec, params)
    with open(out / "train_log.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=["epoch", "loss", "accuracy"])
        w.writeheader()
        w.writerows(rows)
    _write_json(out / "metrics.json", {"test_accuracy": acc, "epochs": cfg.baseline.epochs,
                                       "train_size": len(train), "test_size": len(test)})
    print(f"baseline test accuracy {acc:.4f} -> {out / 'model.npz'}")
    return EXIT_OK


def cmd_prune(cfg: ExperimentConfig, out: Path) -> int:
    model_path = Path(cfg.prune.model) if cfg.prune.model else out / "model.npz"
    if not model_path.exists():
        raise ConfigError(f"baseline model {model_path} not found (run train-baseline first or pass --model)")
    spec, params = tm.load_model(model_path)
    train, test = load_data(cfg)
    acfg = dataclasses.replace(cfg.admm, seed=cfg.seed)
    result = admm.run_pruning(spec, params, train, test, acfg)
    save_kernels(out / "kernels.spk", result.kernels)
    tm.save_model(out / "pruned_model.npz", spec, result.params)
    result.write_log(out / "prune_log.csv")
    k = keep_count(spec.n, acfg.alpha)
    problems = []
    for name, ks in zip(spec.conv_names(), result.kernels):
        try:
            ks.validate()
        except FormatError as exc:
            problems.append(f"{name}: {exc}")
        if ks.k != k:
            problems.append(f"{name}: {ks.k} entries per map, expected {k}")
    z_exact = all(np.all(v == k) for it in result.z_nnz for v in it.values())
    if not z_exact:
        problems.append(f"some Z map does not hold exactly {k} non-zeros")
    metrics = {"accuracy": result.accuracy, "k": k, "alpha": acfg.alpha, "z_exact_k": bool(z_exact), "problems": problems}
    _write_json(out / "metrics.json", metrics)
    print(" ".join(f"{key}={v:.4f}" for key, v in result.accuracy.items()))
    for p in problems:
        print(f"FAIL {p}", file=sys.stderr)
    return EXIT_FAIL if problems else EXIT_OK


def cmd_simulate(cfg: ExperimentConfig, out: Path) -> int:
    s = cfg.simulate
    path = Path(s.kernels) if s.kernels else out / "kernels.spk"
    if not path.exists():
        raise ConfigError(f"kernel file {path} not found")
    layers = load_kernels(path)
    for ks in layers:
        ks.validate()
    sim_cfg = accel_sim.SimConfig(P_b=s.P_b, P_o=s.P_o, R=s.R, c=s.c, n=layers[0].n, b=s.batch)
    rng = np.random.default_rng(cfg.seed)
    problems, per_layer, blobs = [], [], []
    for l, ks in enumerate(layers):
        act = rng.standard_normal((s.batch, ks.c_in, ks.n, ks.n)) + 1j * rng.standard_normal((s.batch, ks.c_in, ks.n, ks.n))
        tables = accel_sim.schedule_tile(ks, s.P_o, s.R)
        rep = accel_sim.simulate_tile(tables, act, sim_cfg, c_out=ks.c_out)
        stats = lambda_stats(ks, s.P_o, s.R)
        analytic = int(round(float(np.sum(stats.lambdas)) * ks.k)) * -(-s.batch // s.P_b)
        err = float(np.max(np.abs(rep.outputs - accel_sim.dense_reference(ks, act))))
        if rep.cycles != analytic:
            problems.append(f"layer {l}: simulated {rep.cycles} cycles, analytic {analytic}")
        if err > 1e-9:
            problems.append(f"layer {l}: output error {err:.3e} vs dense reference")
        per_layer.append({"layer": l, "c_out": ks.c_out, "c_in": ks.c_in, "k": ks.k, **rep.to_dict(),
                          "analytic_cycles": analytic, "max_abs_error": err})
        blobs.extend(serialize_tables(t) for row in tables for t in row)
    with open(out / "tables.spt", "wb") as fh:
        fh.write(b"".join(blobs))
    sweep = accel_sim.utilization_sweep(layers, s.P_o_grid, s.R_grid, workers=cfg.threads)
    with open(out / "sweep.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=["P_o", "R", "alpha", "utilization", "cycles"])
        w.writeheader()
        w.writerows(sweep)
    for p_o in s.P_o_grid:
        utils = [r["utilization"] for r in sweep if r["P_o"] == p_o]
        if any(b < a - 1e-12 for a, b in zip(utils, utils[1:])):
            problems.append(f"P_o={p_o}: utilization not monotone in R: {utils}")
        full = [r["utilization"] for r in sweep if r["P_o"] == p_o and r["R"] == p_o]
        if full and abs(full[0] - 1.0) > 1e-12:
            problems.append(f"P_o={p_o}: R=P_o gives utilization {full[0]}, expected 1")
    _write_json(out / "sim_report.json", {"P_b": s.P_b, "P_o": s.P_o, "R": s.R, "batch": s.batch,
                                          "layers": per_layer, "problems": problems})
    for row in sweep:
        print(f"P_o={row['P_o']:<4d} R={row['R']:<3d} utilization={row['utilization']:.4f}")
    for p in problems:
        print(f"FAIL {p}", file=sys.stderr)
    return EXIT_FAIL if problems else EXIT_OK


def _utilization_table(cfg: ExperimentConfig) -> dse.UtilizationTable:
    e = cfg.explore
    if e.table:
        if not os.path.exists(e.table):
            raise ConfigError(f"utilization table {e.table} not found")
        return dse.UtilizationTable.from_csv(e.table)
    if e.entries:
        return dse.UtilizationTable.from_rows(e.entries)
    # fallback: measure independent random masks at the workload sparsity
    plat = e.platform.build()
    p_os = e.P_o_grid or dse.powers_of_two(min(plat.s_dsp, 256))
    k = keep_count(e.n, e.alpha)
    rng = np.random.default_rng(cfg.seed)
    sets = [accel_sim.random_mask_kernels(p, e.random_channels, e.n, k, rng) for p in p_os]
    table = dse.UtilizationTable()
    for p, ks in zip(p_os, sets):
        rs = e.R_grid or dse.powers_of_two(min(p, 16))
        for row in accel_sim.utilization_sweep(ks, [p], rs, workers=cfg.threads):
            table.add(p, row["R"], e.alpha, row["utilization"])
    return table


def cmd_explore(cfg: ExperimentConfig, out: Path) -> int:
    e = cfg.explore
    if e.workload not in dse.BUILTIN_WORKLOADS:
        raise ConfigError(f"unknown workload {e.workload!r}; choose from {sorted(dse.BUILTIN_WORKLOADS)}")
    try:
        plat = e.platform.build()
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    wl = dse.BUILTIN_WORKLOADS[e.workload](e.n, e.alpha)
    table = _utilization_table(cfg)
    try:
        best, frontier = dse.explore(plat, wl, table, e.P_o_grid, e.R_grid, e.P_b)
    except dse.InfeasibleError as exc:
        print(f"FAIL {exc}", file=sys.stderr)
        return EXIT_FAIL
    dse.write_frontier_csv(out / "frontier.csv", frontier)
    opt = best.to_dict()
    opt["bw_req_bytes_per_s"] = dse.required_bandwidth_bytes(best, plat, wl)
    opt["workload"] = wl.name
    _write_json(out / "optimum.json", opt)
    print(f"optimum P_b={best.P_b} P_o={best.P_o} R={best.R} utilization={best.utilization:.3f} "
          f"fps={best.fps:.1f} bram={best.bram_used} dsp={best.dsp_used}")
    return EXIT_OK


# -- verify --------------------------------------------------------------------------


def _check_conv(trials, tol, rng):
    worst = 0.0
    for _ in range(trials):
        h_krn = int(rng.integers(1, 6))
        n = int(rng.choice([p for p in (4, 8, 16) if p >= h_krn]))
        h = int(rng.integers(max(h_krn, 2, n - h_krn + 1), 20))
        layer = sc.ConvLayerSpec(int(rng.integers(1, 5)), int(rng.integers(1, 5)), h_krn, n,
                                 int(rng.integers(1, 3)), int(rng.integers(0, h_krn)))
        x = rng.standard_normal((2, layer.c_in, h, h))
        w = rng.standard_normal((layer.c_out, layer.c_in, h_krn, h_krn))
        ref = sc.spatial_conv_oracle(x, w, layer.stride, layer.padding)
        got = sc.spectral_conv(x, sc.to_spectral_kernels(w, n), layer)
        worst = max(worst, float(np.linalg.norm(got - ref) / max(np.linalg.norm(ref), 1e-300)))
    return worst, worst <= tol


def _check_sim(trials, tol, rng):
    worst, ok = 0.0, True
    for _ in range(trials):
        p_o = int(rng.choice([4, 8, 16]))
        r = int(rng.integers(1, p_o + 1))
        alpha = float(rng.choice([2, 4, 8]))
        co, ci = int(rng.integers(1, 2 * p_o)), int(rng.integers(1, 5))
        ks = accel_sim.random_mask_kernels(co, ci, 8, keep_count(8, alpha), rng)
        act = rng.standard_normal((2, ci, 8, 8)) + 1j * rng.standard_normal((2, ci, 8, 8))
        cfg = accel_sim.SimConfig(P_b=2, P_o=p_o, R=r, c=max(co, ci), n=8, b=2)
        rep = accel_sim.simulate_tile(accel_sim.schedule_tile(ks, p_o, r), act, cfg, c_out=co)
        analytic = int(round(float(np.sum(lambda_stats(ks, p_o, r).lambdas)) * ks.k))
        ok &= rep.cycles == analytic
        worst = max(worst, float(np.max(np.abs(rep.outputs - accel_sim.dense_reference(ks, act)))))
    return worst, ok and worst <= tol


def _check_projection(trials, rng):
    bad = 0
    for _ in range(trials):
        n = int(rng.choice([2, 4, 8]))
        k = int(rng.integers(1, n * n + 1))
        m = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        z = project_topk(m, k)
        kept = np.abs(m)[z != 0]
        dropped = np.abs(m)[z == 0]
        thresh = np.sort(np.abs(m).ravel())[::-1][k - 1]
        if kept.size != k or (dropped.size and dropped.max() > thresh) or not np.allclose(z[z != 0], m[z != 0]):
            bad += 1
    return float(bad), bad == 0


def _check_gradients(entries, tol, seed):
    spec = tm.SYNTHETIC_TOY
    data = synthetic_digits(6, spec.image_size, spec.num_classes, seed=seed)
    rng = np.random.default_rng(seed)
    params = tm.init_params(spec, rng, spectral_init="random")
    _, cache = tm.forward_loss(spec, params, data.x, data.y)
    grads = tm.backward(cache)
    worst = 0.0
    h = 1e-5
    for key, value in params.items():
        flat = value.reshape(-1)
        picks = rng.choice(flat.size, size=min(entries, flat.size), replace=False)
        num = np.empty(len(picks))
        for t, idx in enumerate(picks):
            old = flat[idx]
            flat[idx] = old + h
            up, _ = tm.forward_loss(spec, params, data.x, data.y)
            flat[idx] = old - h
            down, _ = tm.forward_loss(spec, params, data.x, data.y)
            flat[idx] = old
            num[t] = (up - down) / (2 * h)
        ana = grads[key].reshape(-1)[picks]
        worst = max(worst, float(np.linalg.norm(num - ana) / max(np.linalg.norm(num), np.linalg.norm(ana), 1e-12)))
    return worst, worst <= tol


def cmd_verify(cfg: ExperimentConfig, out: Path, tol_override: float | None = None) -> int:
    v = cfg.verify
    rng = np.random.default_rng(cfg.seed)
    tols = {"conv": v.conv_tol, "sim": v.sim_tol, "grad": v.grad_tol}
    if tol_override is not None:
        tols = {key: tol_override for key in tols}
    rows = []
    t0 = time.perf_counter()
    worst, ok = _check_conv(v.conv_trials, tols["conv"], rng)
    rows.append(("spectral vs spatial conv", f"{worst:.2e}", f"{tols['conv']:.0e}", ok))
    worst, ok = _check_sim(v.sim_trials, tols["sim"], rng)
    rows.append(("simulator vs dense reference", f"{worst:.2e}", f"{tols['sim']:.0e}", ok))
    bad, ok = _check_projection(v.projection_trials, rng)
    rows.append(("top-k projection vs sort oracle", f"{int(bad)} bad", "0", ok))
    worst, ok = _check_gradients(v.grad_entries, tols["grad"], cfg.seed)
    rows.append(("gradients vs finite differences", f"{worst:.2e}", f"{tols['grad']:.0e}", ok))
    if v.kernels:
        try:
            layers = load_kernels(v.kernels)
            for l, ks in enumerate(layers):
                try:
                    ks.validate()
                except FormatError as exc:
                    raise FormatError(f"layer {l}, {exc}") from exc
            rows.append((f"kernel file {v.kernels}", f"{len(layers)} layers", "valid", True))
        except (FormatError, OSError) as exc:
            rows.append((f"kernel file {v.kernels}", str(exc), "valid", False))
    width = max(len(r[0]) for r in rows)
    print(f"{'check':<{width}}  {'measured':>24}  {'tolerance':>9}  result")
    for name, measured, tol, ok in rows:
        print(f"{name:<{width}}  {measured:>24}  {tol:>9}  {'PASS' if ok else 'FAIL'}")
    log.info("verify took %.1f s", time.perf_counter() - t0)
    _write_json(out / "verify.json", [{"check": r[0], "measured": r[1], "tolerance": r[2], "pass": bool(r[3])} for r in rows])
    return EXIT_OK if all(r[3] for r in rows) else EXIT_FAIL


# -- argument parsing ----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML config file")
    common.add_argument("--seed", type=int, help="random seed (default 7)")
    common.add_argument("--out", help="output directory")
    common.add_argument("--threads", type=int, help="worker threads for sweeps")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="specprune", description="Spectral-kernel pruning and sparse accelerator modeling.",
                                parents=[common])
    sub = p.add_subparsers(dest="command", required=True)

    tb = sub.add_parser("train-baseline", parents=[common], help="train the dense spectral toy CNN")
    tb.add_argument("--epochs", type=int)
    tb.add_argument("--lr", type=float)
    tb.add_argument("--data", help="MNIST IDX directory")

    pr = sub.add_parser("prune", parents=[common], help="ADMM prune a baseline model and retrain")
    pr.add_argument("--model", help="baseline model .npz")
    pr.add_argument("--alpha", type=float)
    pr.add_argument("--iterations", type=int)
    pr.add_argument("--data", help="MNIST IDX directory")

    si = sub.add_parser("simulate", parents=[common], help="schedule and simulate an SPK1 kernel file")
    si.add_argument("--kernels", help="SPK1 file")
    si.add_argument("--P_o", type=int, dest="P_o")
    si.add_argument("--R", type=int, dest="R")

    ex = sub.add_parser("explore", parents=[common], help="design-space exploration over (R, P_b, P_o)")
    ex.add_argument("--table", help="utilization CSV (P_o,R,alpha,utilization)")
    ex.add_argument("--workload", choices=sorted(dse.BUILTIN_WORKLOADS))
    ex.add_argument("--alpha", type=float)

    ve = sub.add_parser("verify", parents=[common], help="run the oracle-equivalence checks")
    ve.add_argument("--kernels", help="also validate this SPK1 file")
    ve.add_argument("--tol", type=float, help="override every numeric tolerance")
    return p


def resolve(args: argparse.Namespace) -> ExperimentConfig:
    cfg = load_config(args.config)
    if args.seed is not None:
        if args.seed < 0:
            raise ConfigError("--seed must be non-negative")
        cfg.seed = args.seed
    if args.out is not None:
        cfg.out = args.out
    if args.threads is not None:
        if args.threads < 1:
            raise ConfigError("--threads must be >= 1")
        cfg.threads = args.threads
    cmd = args.command
    if getattr(args, "data", None):
        cfg.data.path = args.data
    if cmd == "train-baseline":
        if args.epochs is not None:
            cfg.baseline.epochs = args.epochs
        if args.lr is not None:
            cfg.baseline.lr = args.lr
    elif cmd == "prune":
        if args.model:
            cfg.prune.model = args.model
        if args.alpha is not None:
            cfg.admm.alpha = args.alpha
        if args.iterations is not None:
            cfg.admm.iterations = args.iterations
    elif cmd == "simulate":
        if args.kernels:
            cfg.simulate.kernels = args.kernels
        if args.P_o is not None:
            cfg.simulate.P_o = args.P_o
        if args.R is not None:
            cfg.simulate.R = args.R
    elif cmd == "explore":
        if args.table:
            cfg.explore.table = args.table
        if args.workload:
            cfg.explore.workload = args.workload
        if args.alpha is not None:
            cfg.explore.alpha = args.alpha
    elif cmd == "verify":
        if args.kernels:
            cfg.verify.kernels = args.kernels
    return cfg


COMMANDS = {
    "train-baseline": cmd_train_baseline,
    "prune": cmd_prune,
    "simulate": cmd_simulate,
    "explore": cmd_explore,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = resolve(args)
        out = Path(cfg.out)
        out.mkdir(parents=True, exist_ok=True)
        write_resolved(cfg, out, args.command)
        if args.command == "verify":
            return cmd_verify(cfg, out, args.tol)
        return COMMANDS[args.command](cfg, out)
    except (ConfigError, accel_sim.SimConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (FormatError, DatasetError, admm.TrainingDiverged) as exc:
        print(f"FAIL {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
