"""Row-level simulator of the sparse Hadamard engine.

One index-table row is one clock: its R addresses are read from the R
replicas of the activation map, every multiplier whose value-table row is
valid picks its operand through an R-to-1 MUX (``sel``), multiplies by its
kernel value and accumulates into its private output map. P_b batch lanes
run the same tables in parallel, so lanes beyond P_b take extra passes.
BRAM latency, pipeline fill/drain and the FFT/IFFT stages are not counted.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import spectral_core as sc
from .sparse_format import ScheduledTables, SparseSpectralKernelSet, build_group_schedule


class SimConfigError(ValueError):
    pass


@dataclass(frozen=True)
class SimConfig:
    P_b: int
    P_o: int
    R: int
    c: int
    n: int
    b: int = 1

    def __post_init__(self):
        if min(self.P_b, self.P_o, self.c, self.n, self.b) < 1:
            raise SimConfigError(f"all sizes must be positive: {self}")
        if not 1 <= self.R <= self.P_o:
            raise SimConfigError(f"R={self.R} outside [1, P_o={self.P_o}]")

    @property
    def P(self) -> int:
        return self.P_b * self.P_o


@dataclass
class SimReport:
    cycles: int
    useful_macs: int
    utilization: float
    lambdas: list[float]
    outputs: np.ndarray | None = field(default=None, repr=False)

    @property
    def lambda_mean(self) -> float:
        return float(np.mean(self.lambdas)) if self.lambdas else 1.0

    def to_dict(self) -> dict:
        return {
            "cycles": int(self.cycles),
            "useful_macs": int(self.useful_macs),
            "utilization": float(self.utilization),
            "lambda_mean": self.lambda_mean,
            "lambdas": [float(v) for v in self.lambdas],
        }


def schedule_tile(kernels: SparseSpectralKernelSet, p_o: int, R: int) -> list[list[ScheduledTables]]:
    """Tables for every (output group g, input channel i) of a kernel tile, indexed [g][i]."""
    out = []
    for g in range(kernels.num_groups(p_o)):
        row = []
        for i in range(kernels.c_in):
            idx, vals, _ = kernels.group_streams(i, g, p_o)
            row.append(build_group_schedule(idx, vals, R))
        out.append(row)
    return out


def simulate_tile(
    tables: list[list[ScheduledTables]],
    act_tile: np.ndarray,
    cfg: SimConfig,
    c_out: int | None = None,
    functional: bool = True,
) -> SimReport:
    """Replay the scheduled tables against a (b, c, n, n) spectral activation tile.

    ``c_out`` trims padding multipliers of the final group (default: all P_o * groups).
    Output maps are accumulated in ascending i, then schedule order.
    """
    b, c, n, n2 = act_tile.shape
    if n != n2 or n != cfg.n:
        raise SimConfigError(f"activation tile {act_tile.shape} does not match n={cfg.n}")
    groups = len(tables)
    width = groups * cfg.P_o
    c_out = width if c_out is None else c_out
    if not width - cfg.P_o < c_out <= width:
        raise SimConfigError(f"c_out={c_out} inconsistent with {groups} groups of P_o={cfg.P_o}")
    acts = act_tile.reshape(b, c, n * n)
    out = np.zeros((b, width, n * n), dtype=np.complex128) if functional else None
    passes = math.ceil(b / cfg.P_b)
    cycles = useful = 0
    lambdas = []
    for g, per_input in enumerate(tables):
        if len(per_input) != c:
            raise SimConfigError(f"group {g} has tables for {len(per_input)} input channels, tile has {c}")
        real = min(cfg.P_o, c_out - g * cfg.P_o)
        for i, tab in enumerate(per_input):
            if tab.p_o != cfg.P_o or tab.R != cfg.R:
                raise SimConfigError(f"table (P_o={tab.p_o}, R={tab.R}) vs config (P_o={cfg.P_o}, R={cfg.R})")
            if np.any(tab.sel >= cfg.R):
                raise SimConfigError("sel >= R in value table")
            if tab.index_table.size and tab.index_table.max() >= n * n:
                raise SimConfigError("index table addresses outside the activation map")
            lambdas.append(tab.lam)
            for row in range(tab.rows):
                # every pass of P_b lanes replays this row once
                cycles += passes
                active = np.flatnonzero(tab.valid[:, row])
                useful += b * int(np.count_nonzero(active < real))
                if functional and active.size:
                    addr = tab.index_table[row][tab.sel[active, row]]
                    out[:, g * cfg.P_o + active, addr] += acts[:, i, addr] * tab.values[active, row]
    util = useful / (cfg.P * cycles) if cycles else 1.0
    outputs = out[:, :c_out].reshape(b, c_out, n, n) if functional else None
    return SimReport(cycles, useful, util, lambdas, outputs)


def dense_reference(kernels: SparseSpectralKernelSet, act_tile: np.ndarray) -> np.ndarray:
    """sum_i X[k,i] o W[j,i] with the densified sparse kernels."""
    w = kernels.to_dense()
    return np.einsum("bixy,jixy->bjxy", act_tile, w)


def simulate_layer(
    kernels: SparseSpectralKernelSet,
    x: np.ndarray,
    layer: sc.ConvLayerSpec,
    cfg: SimConfig,
    functional: bool = True,
) -> tuple[SimReport, np.ndarray | None]:
    """Run a whole conv layer: OaA tiles and c x c channel tiles through :func:`simulate_tile`.

    Every (image, spatial tile) pair occupies one batch lane. Returns the
    aggregated report and the spatial layer output (via IFFT + OaA).
    """
    x = np.asarray(x, dtype=np.float64)
    if kernels.n != layer.n or kernels.c_out != layer.c_out or kernels.c_in != layer.c_in:
        raise SimConfigError("kernel set does not match layer spec")
    if cfg.n != layer.n:
        raise SimConfigError("config FFT size does not match layer")
    b, _, h, _ = x.shape
    layer.check_input(h)
    t = layer.num_tiles(h)
    spec = sc.tile_spectra(x, layer)  # (b, ci, T, T, n, n)
    lanes = spec.transpose(0, 2, 3, 1, 4, 5).reshape(b * t * t, layer.c_in, layer.n, layer.n)
    acc = np.zeros((b * t * t, layer.c_out, layer.n, layer.n), dtype=np.complex128) if functional else None
    cycles = useful = 0
    lambdas: list[float] = []
    for co in range(0, layer.c_out, cfg.c):
        co_hi = min(co + cfg.c, layer.c_out)
        for ci in range(0, layer.c_in, cfg.c):
            ci_hi = min(ci + cfg.c, layer.c_in)
            sub = kernels.select(slice(co, co_hi), slice(ci, ci_hi))
            tables = schedule_tile(sub, cfg.P_o, cfg.R)
            rep = simulate_tile(tables, lanes[:, ci:ci_hi], cfg, c_out=co_hi - co, functional=functional)
            cycles += rep.cycles
            useful += rep.useful_macs
            lambdas.extend(rep.lambdas)
            if functional:
                acc[:, co:co_hi] += rep.outputs
    report = SimReport(cycles, useful, useful / (cfg.P * cycles) if cycles else 1.0, lambdas)
    if not functional:
        return report, None
    y_spec = acc.reshape(b, t, t, layer.c_out, layer.n, layer.n).transpose(0, 3, 1, 2, 4, 5)
    return report, sc.overlap_add(sc.ifft2(y_spec).real, layer, h)


def measure_lambda(kernels: SparseSpectralKernelSet, p_o: int, R: int) -> tuple[float, int]:
    """Simulated mean lambda over groups (padding excluded) and total cycles for one lane."""
    cfg = SimConfig(P_b=1, P_o=p_o, R=R, c=max(kernels.c_in, kernels.c_out), n=kernels.n, b=1)
    act = np.zeros((1, kernels.c_in, kernels.n, kernels.n), dtype=np.complex128)
    rep = simulate_tile(schedule_tile(kernels, p_o, R), act, cfg, c_out=kernels.c_out, functional=False)
    return rep.lambda_mean, rep.cycles


def utilization_sweep(
    kernel_sets: SparseSpectralKernelSet | list[SparseSpectralKernelSet],
    p_o_list,
    r_list,
    workers: int = 1,
) -> list[dict]:
    """Measured 1 / lambda-bar over a (P_o, R) grid; R > P_o is skipped.

    With several kernel sets (layers) lambda-bar averages over all their groups,
    weighting each group by its non-zero count.
    """
    if isinstance(kernel_sets, SparseSpectralKernelSet):
        kernel_sets = [kernel_sets]
    jobs = [(p, r) for p in p_o_list for r in r_list if 1 <= r <= p]

    def run(job):
        p, r = job
        total_rows = total_k = cycles = 0
        for ks in kernel_sets:
            lam, cyc = measure_lambda(ks, p, r)
            groups = ks.num_groups(p) * ks.c_in
            total_rows += lam * ks.k * groups
            total_k += ks.k * groups
            cycles += cyc
        lam_bar = total_rows / total_k
        alpha = kernel_sets[0].alpha
        return {"P_o": p, "R": r, "alpha": alpha, "utilization": 1.0 / lam_bar, "cycles": cycles}

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(run, jobs))
    return [run(j) for j in jobs]


def random_mask_kernels(c_out: int, c_in: int, n: int, k: int, rng: np.random.Generator) -> SparseSpectralKernelSet:
    """Independent uniform random masks with unit-modulus random-phase values."""
    keys = rng.random((c_out, c_in, n * n))
    idx = np.sort(np.argsort(keys, axis=-1)[..., :k], axis=-1)
    vals = np.exp(2j * np.pi * rng.random((c_out, c_in, k)))
    return SparseSpectralKernelSet(n, idx, vals)
