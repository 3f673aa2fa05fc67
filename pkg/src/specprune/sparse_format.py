"""Sparse spectral kernels and the offline request-grouping scheduler.

A group is the P_o multipliers that share one batch lane and one input
channel i. At lockstep step s every multiplier wants the s-th non-zero of
its own kernel stream; the Q_s distinct addresses among those requests are
packed R per index-table row, so the step costs ceil(Q_s / R) cycles.
"""

from __future__ import annotations

import io
import math
import os
import struct
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

KERNEL_MAGIC = b"SPK1"
TABLE_MAGIC = b"SPT1"

_PAIR_RECORD = np.dtype([("index", "<u4"), ("re", "<f8"), ("im", "<f8")])
_VALUE_RECORD = np.dtype([("re", "<f8"), ("im", "<f8"), ("sel", "u1"), ("valid", "u1")])


class FormatError(ValueError):
    pass


def keep_count(n: int, alpha: float) -> int:
    """Non-zeros kept per n x n map at pruning rate alpha: floor(n^2 / alpha)."""
    if alpha < 1:
        raise ValueError(f"pruning rate must be >= 1, got {alpha}")
    return int(math.floor(n * n / alpha + 1e-12))


def topk_indices(maps: np.ndarray, k: int) -> np.ndarray:
    """Flat indices of the k largest-modulus entries of each n x n map, ascending.

    Ties in modulus go to the lower flat index.
    """
    maps = np.asarray(maps)
    n2 = maps.shape[-1] * maps.shape[-2]
    if not 0 <= k <= n2:
        raise ValueError(f"k={k} outside [0, {n2}]")
    flat = np.abs(maps.reshape(maps.shape[:-2] + (n2,)))
    order = np.argsort(-flat, axis=-1, kind="stable")[..., :k]
    return np.sort(order, axis=-1)


def project_topk(maps: np.ndarray, k: int) -> np.ndarray:
    """Keep the k largest-modulus entries of every n x n map and zero the rest."""
    maps = np.asarray(maps)
    keep = topk_indices(maps, k)
    flat = maps.reshape(maps.shape[:-2] + (-1,))
    out = np.zeros_like(flat)
    np.put_along_axis(out, keep, np.take_along_axis(flat, keep, axis=-1), axis=-1)
    return out.reshape(maps.shape)


@dataclass
class SparseSpectralKernelSet:
    """Per-(j, i) sparse n x n spectral maps with the same non-zero count k.

    ``indices[j, i]`` are flat positions in [0, n^2), strictly increasing;
    ``values[j, i]`` the matching complex entries.
    """

    n: int
    indices: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        self.indices = np.asarray(self.indices, dtype=np.int64)
        self.values = np.asarray(self.values, dtype=np.complex128)
        if self.indices.ndim != 3 or self.indices.shape != self.values.shape:
            raise FormatError(f"indices {self.indices.shape} / values {self.values.shape} mismatch")

    @property
    def c_out(self) -> int:
        return self.indices.shape[0]

    @property
    def c_in(self) -> int:
        return self.indices.shape[1]

    @property
    def k(self) -> int:
        return self.indices.shape[2]

    @property
    def alpha(self) -> float:
        return self.n * self.n / self.k if self.k else math.inf

    @classmethod
    def from_dense(cls, w_spec: np.ndarray, alpha: float | None = None, k: int | None = None):
        n = w_spec.shape[-1]
        if k is None:
            k = keep_count(n, alpha if alpha is not None else 1.0)
        idx = topk_indices(w_spec, k)
        vals = np.take_along_axis(w_spec.reshape(w_spec.shape[:2] + (-1,)), idx, axis=-1)
        return cls(n, idx, vals)

    @classmethod
    def from_masked(cls, w_spec: np.ndarray, mask: np.ndarray):
        """Exact-k set from a boolean mask (same count in every map)."""
        counts = mask.reshape(mask.shape[:2] + (-1,)).sum(-1)
        if counts.size and np.any(counts != counts.flat[0]):
            raise FormatError("mask has unequal non-zero counts across maps")
        k = int(counts.flat[0]) if counts.size else 0
        flat_mask = mask.reshape(mask.shape[:2] + (-1,))
        idx = np.argsort(~flat_mask, axis=-1, kind="stable")[..., :k]
        idx = np.sort(idx, axis=-1)
        vals = np.take_along_axis(w_spec.reshape(w_spec.shape[:2] + (-1,)), idx, axis=-1)
        return cls(w_spec.shape[-1], idx, vals)

    def to_dense(self) -> np.ndarray:
        flat = np.zeros((self.c_out, self.c_in, self.n * self.n), dtype=np.complex128)
        np.put_along_axis(flat, self.indices, self.values, axis=-1)
        return flat.reshape(self.c_out, self.c_in, self.n, self.n)

    def mask(self) -> np.ndarray:
        flat = np.zeros((self.c_out, self.c_in, self.n * self.n), dtype=bool)
        np.put_along_axis(flat, self.indices, True, axis=-1)
        return flat.reshape(self.c_out, self.c_in, self.n, self.n)

    def select(self, out_channels: slice, in_channels: slice) -> "SparseSpectralKernelSet":
        return SparseSpectralKernelSet(self.n, self.indices[out_channels, in_channels], self.values[out_channels, in_channels])

    def group_streams(self, i: int, g: int, p_o: int) -> tuple[np.ndarray, np.ndarray, int]:
        """Index/value streams of group g for input channel i, padded to P_o maps
        by repeating the last real map. Returns (indices, values, real map count)."""
        lo = g * p_o
        hi = min(lo + p_o, self.c_out)
        if lo >= self.c_out:
            raise IndexError(f"group {g} out of range for c_out={self.c_out}")
        idx = self.indices[lo:hi, i]
        vals = self.values[lo:hi, i]
        real = hi - lo
        if real < p_o:
            pad = p_o - real
            idx = np.concatenate([idx, np.repeat(idx[-1:], pad, axis=0)])
            vals = np.concatenate([vals, np.repeat(vals[-1:], pad, axis=0)])
        return idx, vals, real

    def num_groups(self, p_o: int) -> int:
        return math.ceil(self.c_out / p_o)

    def validate(self) -> None:
        """Raise FormatError naming the first offending (j, i) map."""
        n2 = self.n * self.n
        if self.k > n2:
            raise FormatError(f"k={self.k} exceeds n^2={n2}")
        for j in range(self.c_out):
            for i in range(self.c_in):
                idx = self.indices[j, i]
                if idx.size and (idx.min() < 0 or idx.max() >= n2):
                    raise FormatError(f"map (j={j}, i={i}): index out of range [0, {n2})")
                if np.any(np.diff(idx) <= 0):
                    raise FormatError(f"map (j={j}, i={i}): indices not strictly increasing")
                if not np.all(np.isfinite(self.values[j, i])):
                    raise FormatError(f"map (j={j}, i={i}): non-finite value")

    def __eq__(self, other):
        if not isinstance(other, SparseSpectralKernelSet):
            return NotImplemented
        return (
            self.n == other.n
            and np.array_equal(self.indices, other.indices)
            and np.array_equal(self.values, other.values)
        )


# -- scheduling -----------------------------------------------------------------


@dataclass
class ScheduledTables:
    """Index table (rows x R addresses) and per-multiplier value tables for one group."""

    index_table: np.ndarray  # (rows, R) uint32
    values: np.ndarray  # (P_o, rows) complex
    sel: np.ndarray  # (P_o, rows) uint8, replica column
    valid: np.ndarray  # (P_o, rows) bool
    k: int
    step_q: np.ndarray = field(default=None)  # Q_s per lockstep step, when known

    @property
    def rows(self) -> int:
        return self.index_table.shape[0]

    @property
    def R(self) -> int:
        return self.index_table.shape[1]

    @property
    def p_o(self) -> int:
        return self.values.shape[0]

    @property
    def lam(self) -> float:
        return self.rows / self.k if self.k else 1.0

    def check(self) -> None:
        if np.any(self.sel >= self.R):
            raise FormatError("sel column addresses a replica >= R")
        counts = self.valid.sum(axis=1)
        if np.any(counts != self.k):
            raise FormatError(f"valid rows per multiplier {counts.tolist()} != k={self.k}")

    def __eq__(self, other):
        if not isinstance(other, ScheduledTables):
            return NotImplemented
        return (
            self.k == other.k
            and np.array_equal(self.index_table, other.index_table)
            and np.array_equal(self.values, other.values)
            and np.array_equal(self.sel, other.sel)
            and np.array_equal(self.valid, other.valid)
        )


def build_group_schedule(indices: np.ndarray, values: np.ndarray, R: int) -> ScheduledTables:
    """Lockstep schedule of P_o sorted non-zero streams served by R replicas.

    ``indices``/``values`` have shape (P_o, k); row i of each is one kernel map.
    """
    indices = np.asarray(indices)
    values = np.asarray(values, dtype=np.complex128)
    if indices.ndim != 2:
        raise FormatError("a group takes a (P_o, k) index array; unequal non-zero counts are not schedulable")
    p_o, k = indices.shape
    if values.shape != (p_o, k):
        raise FormatError(f"values {values.shape} do not match indices {indices.shape}")
    if not 1 <= R <= p_o:
        raise ValueError(f"R={R} outside [1, P_o={p_o}]")
    if R > 255:
        raise ValueError("sel is stored in one byte; R must be <= 255")

    index_rows, step_q = [], np.zeros(k, dtype=np.int64)
    row_of = np.zeros((p_o, k), dtype=np.int64)
    sel_of = np.zeros((p_o, k), dtype=np.int64)
    base = 0
    for s in range(k):
        addrs = indices[:, s]
        uniq = np.unique(addrs)
        q = uniq.size
        nrows = -(-q // R)
        padded = np.concatenate([uniq, np.repeat(uniq[-1], nrows * R - q)])
        index_rows.append(padded.reshape(nrows, R))
        pos = np.searchsorted(uniq, addrs)
        row_of[:, s] = base + pos // R
        sel_of[:, s] = pos % R
        step_q[s] = q
        base += nrows

    rows = base
    index_table = np.concatenate(index_rows).astype(np.uint32) if index_rows else np.zeros((0, R), np.uint32)
    vt = np.zeros((p_o, rows), dtype=np.complex128)
    sel = np.zeros((p_o, rows), dtype=np.uint8)
    valid = np.zeros((p_o, rows), dtype=bool)
    lanes = np.arange(p_o)[:, None]
    vt[lanes, row_of] = values
    sel[lanes, row_of] = sel_of
    valid[lanes, row_of] = True
    return ScheduledTables(index_table, vt, sel, valid, k, step_q)


def step_unique_counts(indices: np.ndarray) -> np.ndarray:
    """Q_s for each lockstep step of a (P_o, k) group."""
    if indices.shape[1] == 0:
        return np.zeros(0, dtype=np.int64)
    srt = np.sort(indices, axis=0)
    return 1 + np.count_nonzero(np.diff(srt, axis=0), axis=0)


@dataclass
class GroupScheduleStats:
    lambdas: np.ndarray  # (c_in, groups)
    lambda_mean: float
    q_histogram: dict[int, int]

    @property
    def utilization(self) -> float:
        return 1.0 / self.lambda_mean


def lambda_stats(kernel_set: SparseSpectralKernelSet, p_o: int, R: int) -> GroupScheduleStats:
    """Per-group overhead lambda = sum_s ceil(Q_s / R) / k and its mean over groups."""
    if kernel_set.c_out == 0 or kernel_set.c_in == 0 or kernel_set.k == 0:
        raise ValueError("empty kernel set")
    if not 1 <= R <= p_o:
        raise ValueError(f"R={R} outside [1, P_o={p_o}]")
    groups = kernel_set.num_groups(p_o)
    lambdas = np.zeros((kernel_set.c_in, groups))
    hist: Counter = Counter()
    for g in range(groups):
        lo, hi = g * p_o, min((g + 1) * p_o, kernel_set.c_out)
        for i in range(kernel_set.c_in):
            # padding maps repeat an existing stream, so only real maps matter
            q = step_unique_counts(kernel_set.indices[lo:hi, i])
            hist.update(q.tolist())
            lambdas[i, g] = (-(-q // R)).sum() / kernel_set.k
    return GroupScheduleStats(lambdas, float(lambdas.mean()), dict(sorted(hist.items())))


# -- serialization --------------------------------------------------------------


def _need(buf: memoryview, pos: int, size: int, what: str):
    if pos + size > len(buf):
        raise FormatError(f"truncated stream while reading {what}")


def serialize_kernels(layers: list[SparseSpectralKernelSet]) -> bytes:
    out = io.BytesIO()
    out.write(KERNEL_MAGIC)
    out.write(struct.pack("<I", len(layers)))
    for ks in layers:
        out.write(struct.pack("<4I", ks.c_out, ks.c_in, ks.n, ks.k))
        rec = np.empty(ks.indices.size, dtype=_PAIR_RECORD)
        rec["index"] = ks.indices.reshape(-1)
        rec["re"] = ks.values.real.reshape(-1)
        rec["im"] = ks.values.imag.reshape(-1)
        out.write(rec.tobytes())
    return out.getvalue()


def deserialize_kernels(data: bytes) -> list[SparseSpectralKernelSet]:
    buf = memoryview(data)
    _need(buf, 0, 8, "header")
    if bytes(buf[:4]) != KERNEL_MAGIC:
        raise FormatError(f"bad magic {bytes(buf[:4])!r}, expected {KERNEL_MAGIC!r}")
    (count,) = struct.unpack_from("<I", buf, 4)
    pos, layers = 8, []
    for layer in range(count):
        _need(buf, pos, 16, f"layer {layer} header")
        c_out, c_in, n, k = struct.unpack_from("<4I", buf, pos)
        pos += 16
        size = c_out * c_in * k * _PAIR_RECORD.itemsize
        _need(buf, pos, size, f"layer {layer} records")
        rec = np.frombuffer(buf, dtype=_PAIR_RECORD, count=c_out * c_in * k, offset=pos)
        pos += size
        idx = rec["index"].astype(np.int64).reshape(c_out, c_in, k)
        vals = (rec["re"] + 1j * rec["im"]).reshape(c_out, c_in, k)
        layers.append(SparseSpectralKernelSet(n, idx, vals))
    if pos != len(buf):
        raise FormatError(f"{len(buf) - pos} trailing bytes after {count} layers")
    return layers


def serialize_tables(tables: ScheduledTables) -> bytes:
    out = io.BytesIO()
    out.write(TABLE_MAGIC)
    out.write(struct.pack("<3I", tables.p_o, tables.R, tables.rows))
    out.write(tables.index_table.astype("<u4").tobytes())
    for p in range(tables.p_o):
        rec = np.empty(tables.rows, dtype=_VALUE_RECORD)
        rec["re"] = tables.values[p].real
        rec["im"] = tables.values[p].imag
        rec["sel"] = tables.sel[p]
        rec["valid"] = tables.valid[p]
        out.write(rec.tobytes())
    return out.getvalue()


def _read_tables(buf: memoryview, pos: int) -> tuple[ScheduledTables, int]:
    _need(buf, pos, 16, "table header")
    if bytes(buf[pos:pos + 4]) != TABLE_MAGIC:
        raise FormatError(f"bad magic {bytes(buf[pos:pos + 4])!r}, expected {TABLE_MAGIC!r}")
    p_o, R, rows = struct.unpack_from("<3I", buf, pos + 4)
    pos += 16
    _need(buf, pos, rows * R * 4, "index table")
    index_table = np.frombuffer(buf, dtype="<u4", count=rows * R, offset=pos).reshape(rows, R).astype(np.uint32)
    pos += rows * R * 4
    _need(buf, pos, p_o * rows * _VALUE_RECORD.itemsize, "value tables")
    rec = np.frombuffer(buf, dtype=_VALUE_RECORD, count=p_o * rows, offset=pos).reshape(p_o, rows)
    pos += p_o * rows * _VALUE_RECORD.itemsize
    valid = rec["valid"].astype(bool)
    k = int(valid[0].sum()) if p_o else 0
    tables = ScheduledTables(index_table, rec["re"] + 1j * rec["im"], rec["sel"].astype(np.uint8), valid, k)
    tables.check()
    return tables, pos


def deserialize_tables(data: bytes) -> ScheduledTables:
    buf = memoryview(data)
    tables, pos = _read_tables(buf, 0)
    if pos != len(buf):
        raise FormatError("trailing bytes after table")
    return tables


def deserialize_table_stream(data: bytes) -> list[ScheduledTables]:
    """Several SPT1 records written back to back."""
    buf = memoryview(data)
    pos, out = 0, []
    while pos < len(buf):
        tables, pos = _read_tables(buf, pos)
        out.append(tables)
    return out


def save_kernels(path: str | os.PathLike, layers: list[SparseSpectralKernelSet]) -> None:
    with open(path, "wb") as fh:
        fh.write(serialize_kernels(layers))


def load_kernels(path: str | os.PathLike) -> list[SparseSpectralKernelSet]:
    with open(path, "rb") as fh:
        return deserialize_kernels(fh.read())
