"""Analytic throughput model of the sparse spectral engine and (R, P_b, P_o) search.

Units: bandwidth is counted in complex words per cycle, throughput in
multiply/add operations per second (one MAC = 2 ops).
"""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Iterable

from .sparse_format import keep_count
from .spectral_core import ConvLayerSpec

BYTES_PER_COMPLEX_WORD = 4  # two 16-bit fixed-point halves
KERNEL_BRAM_PER_CHANNEL = 1.5  # one 36K block for values + one 18K block for indices


class InfeasibleError(ValueError):
    pass


@dataclass(frozen=True)
class PlatformSpec:
    s_dsp: int
    s_bram: int
    s_bw: float  # complex words per cycle
    freq_hz: float

    def __post_init__(self):
        if min(self.s_dsp, self.s_bram, self.s_bw, self.freq_hz) <= 0:
            raise ValueError(f"platform resources must be positive: {self}")

    @classmethod
    def from_bytes_per_second(cls, s_dsp, s_bram, bytes_per_s, freq_hz):
        return cls(s_dsp, s_bram, bytes_per_s / (BYTES_PER_COMPLEX_WORD * freq_hz), freq_hz)


# Virtex-7 XC7VX690T at 200 MHz with 21 GB/s peak DDR bandwidth
VIRTEX7_690T = PlatformSpec.from_bytes_per_second(3600, 1470, 21e9, 200e6)


@dataclass(frozen=True)
class ConvLayerShape:
    c_in: int
    c_out: int
    h_act: int
    h_krn: int


@dataclass
class WorkloadSpec:
    layers: list[ConvLayerShape]
    n: int
    alpha: float
    name: str = "custom"

    @property
    def k(self) -> int:
        return keep_count(self.n, self.alpha)

    def tiles(self, layer: ConvLayerShape) -> int:
        m = self.n - layer.h_krn + 1
        if m < 1:
            raise ValueError(f"FFT size {self.n} smaller than kernel {layer.h_krn}")
        return math.ceil(layer.h_act / m) ** 2

    def macs_per_image(self) -> int:
        """Hadamard MACs on non-zero kernel entries; FFT/IFFT work excluded."""
        return sum(self.tiles(l) * l.c_in * l.c_out * self.k for l in self.layers)

    def spatial_macs_per_image(self) -> int:
        """Sliding-window MACs for the same layers with 'same' padding and stride 1."""
        total = 0
        for l in self.layers:
            spec = ConvLayerSpec(l.c_in, l.c_out, l.h_krn, self.n, 1, (l.h_krn - 1) // 2)
            out = spec.output_size(l.h_act)
            total += out * out * l.c_in * l.c_out * l.h_krn ** 2
        return total


_VGG16_CONV = [
    (3, 64, 224), (64, 64, 224),
    (64, 128, 112), (128, 128, 112),
    (128, 256, 56), (256, 256, 56), (256, 256, 56),
    (256, 512, 28), (512, 512, 28), (512, 512, 28),
    (512, 512, 14), (512, 512, 14), (512, 512, 14),
]


def vgg16_workload(n: int = 8, alpha: float = 4.0) -> WorkloadSpec:
    """The 13 3x3 conv layers of VGG16 on 224 x 224 inputs."""
    return WorkloadSpec([ConvLayerShape(ci, co, h, 3) for ci, co, h in _VGG16_CONV], n, alpha, "vgg16")


def lenet_toy_workload(n: int = 8, alpha: float = 4.0) -> WorkloadSpec:
    return WorkloadSpec([ConvLayerShape(1, 8, 28, 5), ConvLayerShape(8, 16, 12, 5)], n, alpha, "lenet-toy")


BUILTIN_WORKLOADS = {"vgg16": vgg16_workload, "lenet-toy": lenet_toy_workload}


@dataclass
class DesignPoint:
    R: int
    P_b: int
    P_o: int
    lam: float
    t_sys: float = 0.0
    bw_req: float = 0.0  # complex words per cycle
    fps: float = 0.0
    dsp_ok: bool = True
    bram_ok: bool = True

    @property
    def utilization(self) -> float:
        return 1.0 / self.lam

    @property
    def dsp_used(self) -> int:
        return self.P_b * self.P_o

    @property
    def bram_used(self) -> float:
        return self.P_b * (self.R + self.P_o) + KERNEL_BRAM_PER_CHANNEL * self.P_o

    @property
    def feasible(self) -> bool:
        return self.dsp_ok and self.bram_ok

    def check(self, plat: PlatformSpec) -> "DesignPoint":
        self.dsp_ok = self.dsp_used <= plat.s_dsp
        self.bram_ok = self.bram_used <= plat.s_bram
        return self

    def to_dict(self) -> dict:
        d = asdict(self)
        d.update(utilization=self.utilization, dsp_used=self.dsp_used, bram_used=self.bram_used, feasible=self.feasible)
        return d


def required_bandwidth(P_b: int, P_o: int, lam: float, n: int, k: int) -> float:
    """Words per cycle the FFT front end needs: 2 * P_b * n^2 / Omega_H.

    Omega_H = c * lam * k cycles per tile (stalls included), with c = P_o.
    """
    omega_h = P_o * lam * k
    return 2.0 * P_b * n * n / omega_h


def bandwidth_factor(plat: PlatformSpec, bw_req: float) -> float:
    return min(1.0, 0.5 * plat.s_bw / bw_req) if bw_req > 0 else 1.0


def t_sys(dp: DesignPoint, plat: PlatformSpec, n: int = 8, alpha: float = 4.0) -> float:
    """Modeled operations per second of a design point."""
    if dp.lam < 1.0 - 1e-12:
        raise ValueError(f"lambda-bar must be >= 1, got {dp.lam}")
    dp.bw_req = required_bandwidth(dp.P_b, dp.P_o, dp.lam, n, keep_count(n, alpha))
    dp.t_sys = (1.0 / dp.lam) * dp.P_o * dp.P_b * 2 * bandwidth_factor(plat, dp.bw_req) * plat.freq_hz
    return dp.t_sys


def fps(dp: DesignPoint, plat: PlatformSpec, wl: WorkloadSpec) -> float:
    """Images per second: sustained MAC rate over non-zero MACs per image."""
    macs = wl.macs_per_image()
    if macs <= 0:
        raise ValueError("workload has no MACs")
    rate = t_sys(dp, plat, wl.n, wl.alpha) / 2.0
    dp.fps = rate / macs
    return dp.fps


def required_bandwidth_bytes(dp: DesignPoint, plat: PlatformSpec, wl: WorkloadSpec) -> float:
    bw = required_bandwidth(dp.P_b, dp.P_o, dp.lam, wl.n, wl.k)
    return bw * plat.freq_hz * BYTES_PER_COMPLEX_WORD


# -- lambda providers ------------------------------------------------------------

LambdaProvider = Callable[[int, int, float], "float | None"]


@dataclass
class UtilizationTable:
    """Utilization lookup keyed by (P_o, R, alpha); missing entries are not explored."""

    entries: dict[tuple[int, int, float], float] = field(default_factory=dict)

    def __call__(self, P_o: int, R: int, alpha: float) -> float | None:
        util = self.entries.get((P_o, R, float(alpha)))
        return None if util is None else 1.0 / util

    def r_values(self, P_o: int, alpha: float) -> list[int]:
        return sorted(r for (p, r, a) in self.entries if p == P_o and a == float(alpha))

    def add(self, P_o: int, R: int, alpha: float, utilization: float) -> None:
        if not 0 < utilization <= 1:
            raise ValueError(f"utilization must lie in (0, 1], got {utilization}")
        self.entries[(int(P_o), int(R), float(alpha))] = float(utilization)

    @classmethod
    def from_rows(cls, rows: Iterable[dict]) -> "UtilizationTable":
        table = cls()
        for r in rows:
            table.add(int(r["P_o"]), int(r["R"]), float(r["alpha"]), float(r["utilization"]))
        return table

    @classmethod
    def from_csv(cls, path) -> "UtilizationTable":
        with open(path, newline="") as fh:
            return cls.from_rows(csv.DictReader(fh))


def powers_of_two(limit: int) -> list[int]:
    out, p = [], 1
    while p <= limit:
        out.append(p)
        p *= 2
    return out


def explore(
    plat: PlatformSpec,
    wl: WorkloadSpec,
    lam_provider: UtilizationTable | LambdaProvider,
    p_o_candidates: Iterable[int] | None = None,
    r_candidates: Iterable[int] | None = None,
    p_b: int | None = None,
) -> tuple[DesignPoint, list[DesignPoint]]:
    """Maximize modeled throughput over (R, P_b, P_o) under the DSP and BRAM budgets.

    ``p_b`` fixes batch parallelism (the batch size); ``None`` searches 1..S_DSP.
    R candidates default to whatever the provider knows for each P_o.
    Ties go to fewer BRAMs, then smaller R. Returns (optimum, every evaluated point).
    """
    p_o_list = list(p_o_candidates) if p_o_candidates is not None else powers_of_two(plat.s_dsp)
    frontier: list[DesignPoint] = []
    for p_o in p_o_list:
        if r_candidates is not None:
            rs = [r for r in r_candidates if 1 <= r <= p_o]
        elif isinstance(lam_provider, UtilizationTable):
            rs = [r for r in lam_provider.r_values(p_o, wl.alpha) if r <= p_o]
        else:
            rs = list(range(1, p_o + 1))
        for r in rs:
            lam = lam_provider(p_o, r, wl.alpha)
            if lam is None:
                continue
            pbs = [p_b] if p_b is not None else range(1, plat.s_dsp // p_o + 1)
            for pb in pbs:
                dp = DesignPoint(R=r, P_b=pb, P_o=p_o, lam=lam).check(plat)
                fps(dp, plat, wl)
                frontier.append(dp)
    feasible = [d for d in frontier if d.feasible]
    if not feasible:
        raise InfeasibleError("no (R, P_b, P_o) candidate satisfies the DSP and BRAM budgets")
    best = min(feasible, key=lambda d: (-d.t_sys, d.bram_used, d.R))
    return best, frontier


FRONTIER_COLUMNS = ["P_b", "P_o", "R", "utilization", "t_sys", "fps", "bram_used", "dsp_used", "feasible"]


def write_frontier_csv(path, frontier: list[DesignPoint]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(FRONTIER_COLUMNS)
        for d in frontier:
            w.writerow([d.P_b, d.P_o, d.R, f"{d.utilization:.6f}", f"{d.t_sys:.6e}", f"{d.fps:.4f}",
                        d.bram_used, d.dsp_used, int(d.feasible)])
