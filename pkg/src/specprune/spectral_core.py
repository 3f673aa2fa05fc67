"""Exact spectral convolution via 2D FFT with overlap-and-add (OaA) tiling.

Array conventions (all numpy):

* spatial activations ``x``: real, shape (b, c_in, h_act, h_act)
* spatial kernels ``w``: real, shape (c_out, c_in, h_krn, h_krn)
* spectral kernels ``w_spec``: complex, shape (c_out, c_in, n, n)
* tile spectra: complex, shape (b, c, T, T, n, n) with T = ceil(h_act / m)

Convolution here is *true* convolution (kernel flipped relative to
cross-correlation), which is what a product of spectra computes. Kernels
trained as cross-correlation must be flipped before conversion.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class SizeError(ValueError):
    pass


def is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


def _check_square_pow2(a: np.ndarray) -> int:
    if a.ndim < 2 or a.shape[-1] != a.shape[-2]:
        raise SizeError(f"expected (..., n, n) array, got shape {a.shape}")
    n = a.shape[-1]
    if not is_power_of_two(n):
        raise SizeError(f"FFT size {n} is not a power of two")
    return n


def fft2(tile: np.ndarray) -> np.ndarray:
    """Unnormalized 2D DFT over the last two axes (n must be a power of two)."""
    tile = np.asarray(tile)
    _check_square_pow2(tile)
    return np.fft.fft2(tile, axes=(-2, -1))


def ifft2(spec: np.ndarray) -> np.ndarray:
    """Inverse of :func:`fft2`; carries the full 1/n^2 normalization."""
    spec = np.asarray(spec)
    _check_square_pow2(spec)
    return np.fft.ifft2(spec, axes=(-2, -1))


@dataclass(frozen=True)
class ConvLayerSpec:
    c_in: int
    c_out: int
    h_krn: int
    n: int
    stride: int = 1
    padding: int = 0

    def __post_init__(self):
        if min(self.c_in, self.c_out, self.h_krn) < 1:
            raise SizeError(f"channel counts and kernel size must be >= 1: {self}")
        if not is_power_of_two(self.n):
            raise SizeError(f"FFT size {self.n} is not a power of two")
        if self.h_krn > self.n:
            raise SizeError(f"kernel size {self.h_krn} exceeds FFT size {self.n}")
        if self.stride < 1:
            raise SizeError("stride must be >= 1")
        if not 0 <= self.padding <= self.h_krn - 1:
            raise SizeError(f"padding must lie in [0, {self.h_krn - 1}]")

    @property
    def m(self) -> int:
        """Tile step: input pixels per tile side."""
        return self.n - self.h_krn + 1

    def num_tiles(self, h_act: int) -> int:
        return math.ceil(h_act / self.m)

    def output_size(self, h_act: int) -> int:
        span = h_act + 2 * self.padding - self.h_krn
        if span < 0:
            raise SizeError(f"input {h_act} too small for kernel {self.h_krn} with padding {self.padding}")
        return span // self.stride + 1

    def check_input(self, h_act: int) -> None:
        if not self.h_krn <= self.n <= h_act + self.h_krn - 1:
            raise SizeError(f"FFT size {self.n} outside [{self.h_krn}, {h_act + self.h_krn - 1}] for h_act={h_act}")
        self.output_size(h_act)


def _check_activations(x: np.ndarray, c_in: int | None = None) -> None:
    if x.ndim != 4 or x.shape[-1] != x.shape[-2] or min(x.shape) < 1:
        raise SizeError(f"activations must be (b, c, h, h) with all dims >= 1, got {x.shape}")
    if c_in is not None and x.shape[1] != c_in:
        raise SizeError(f"activations have {x.shape[1]} channels, layer expects {c_in}")


# -- OaA building blocks ------------------------------------------------------


def tile_spectra(x: np.ndarray, layer: ConvLayerSpec) -> np.ndarray:
    """Cut (b, c, h, h) into m x m tiles, zero-pad each to n x n, FFT.

    The last tile row/column is zero-padded when m does not divide h.
    """
    b, c, h, _ = x.shape
    m, n, t = layer.m, layer.n, layer.num_tiles(h)
    canvas = np.zeros((b, c, t * m, t * m), dtype=x.dtype)
    canvas[..., :h, :h] = x
    tiles = canvas.reshape(b, c, t, m, t, m).transpose(0, 1, 2, 4, 3, 5)
    padded = np.zeros((b, c, t, t, n, n), dtype=x.dtype)
    padded[..., :m, :m] = tiles
    return fft2(padded)


def tile_spectra_adjoint(grad_spec: np.ndarray, layer: ConvLayerSpec, h_act: int) -> np.ndarray:
    """Gradient w.r.t. real x given the gradient (re + 1j*im) w.r.t. :func:`tile_spectra`."""
    b, c, t, _, n, _ = grad_spec.shape
    m = layer.m
    # adjoint of the unnormalized DFT is n^2 * inverse DFT
    g = (ifft2(grad_spec).real * (n * n))[..., :m, :m]
    g = g.transpose(0, 1, 2, 4, 3, 5).reshape(b, c, t * m, t * m)
    return g[..., :h_act, :h_act]


def hadamard_reduce(x_spec: np.ndarray, w_spec: np.ndarray) -> np.ndarray:
    """sum_i X[k,i] o W[j,i] for every tile: (b,ci,T,T,n,n) x (co,ci,n,n) -> (b,co,T,T,n,n)."""
    b, ci, t, _, n, _ = x_spec.shape
    co = w_spec.shape[0]
    if w_spec.shape != (co, ci, n, n):
        raise SizeError(f"kernel spectra {w_spec.shape} do not match tiles {x_spec.shape}")
    # batched over frequency bins: (n^2, b*T*T, ci) @ (n^2, ci, co)
    xs = x_spec.transpose(4, 5, 0, 2, 3, 1).reshape(n * n, b * t * t, ci)
    ws = w_spec.transpose(2, 3, 1, 0).reshape(n * n, ci, co)
    out = np.matmul(xs, ws)
    return out.reshape(n, n, b, t, t, co).transpose(2, 5, 3, 4, 0, 1)


def overlap_add(y_tiles: np.ndarray, layer: ConvLayerSpec, h_act: int) -> np.ndarray:
    """Place n x n output tiles at stride m, sum the h_krn-1 overlapping pixels,
    then crop for padding and slice for stride (crop first, then slice)."""
    b, c, t, _, n, _ = y_tiles.shape
    m, hk = layer.m, layer.h_krn
    q = math.ceil(n / m)
    tiles = np.zeros((b, c, t, t, q * m, q * m), dtype=y_tiles.dtype)
    tiles[..., :n, :n] = y_tiles
    tiles = tiles.reshape(b, c, t, t, q, m, q, m)
    side = t + q - 1
    canvas = np.zeros((b, c, side, m, side, m), dtype=y_tiles.dtype)
    for a in range(q):
        for d in range(q):
            canvas[:, :, a:a + t, :, d:d + t, :] += tiles[:, :, :, :, a, :, d, :].transpose(0, 1, 2, 4, 3, 5)
    full = canvas.reshape(b, c, side * m, side * m)[..., : h_act + hk - 1, : h_act + hk - 1]
    off = hk - 1 - layer.padding
    size = h_act + 2 * layer.padding - hk + 1
    return full[..., off:off + size, off:off + size][..., :: layer.stride, :: layer.stride]


def overlap_add_adjoint(grad_out: np.ndarray, layer: ConvLayerSpec, h_act: int) -> np.ndarray:
    """Gradient w.r.t. the n x n output tiles given the gradient of :func:`overlap_add`."""
    b, c = grad_out.shape[:2]
    m, n, hk = layer.m, layer.n, layer.h_krn
    t = layer.num_tiles(h_act)
    q = math.ceil(n / m)
    side = t + q - 1
    off = hk - 1 - layer.padding
    size = h_act + 2 * layer.padding - hk + 1
    canvas = np.zeros((b, c, side * m, side * m), dtype=grad_out.dtype)
    window = canvas[..., off:off + size, off:off + size]
    window[..., :: layer.stride, :: layer.stride] = grad_out
    blocks = canvas.reshape(b, c, side, m, side, m)
    tiles = np.empty((b, c, t, t, q, m, q, m), dtype=grad_out.dtype)
    for a in range(q):
        for d in range(q):
            tiles[:, :, :, :, a, :, d, :] = blocks[:, :, a:a + t, :, d:d + t, :].transpose(0, 1, 2, 4, 3, 5)
    return tiles.reshape(b, c, t, t, q * m, q * m)[..., :n, :n]


# -- public operations ----------------------------------------------------------


def to_spectral_kernels(w: np.ndarray, n: int) -> np.ndarray:
    """Zero-pad each h_krn x h_krn kernel to n x n and transform it."""
    w = np.asarray(w, dtype=np.float64)
    if w.ndim != 4 or w.shape[-1] != w.shape[-2]:
        raise SizeError(f"kernels must be (c_out, c_in, h, h), got {w.shape}")
    hk = w.shape[-1]
    if hk > n:
        raise SizeError(f"kernel size {hk} exceeds FFT size {n}")
    padded = np.zeros(w.shape[:2] + (n, n))
    padded[..., :hk, :hk] = w
    return fft2(padded)


def from_spectral_kernels(w_spec: np.ndarray, h_krn: int) -> np.ndarray:
    """Inverse of :func:`to_spectral_kernels` (real part, cropped to h_krn)."""
    return ifft2(w_spec).real[..., :h_krn, :h_krn]


def spectral_conv(x: np.ndarray, w_spec: np.ndarray, layer: ConvLayerSpec) -> np.ndarray:
    """Convolution layer computed as IFFT(sum_i FFT(x_i) o W~_i) tile by tile with OaA."""
    x = np.asarray(x, dtype=np.float64)
    _check_activations(x, layer.c_in)
    h = x.shape[-1]
    layer.check_input(h)
    if w_spec.shape != (layer.c_out, layer.c_in, layer.n, layer.n):
        raise SizeError(f"spectral kernels {w_spec.shape} do not match layer {layer}")
    y_spec = hadamard_reduce(tile_spectra(x, layer), w_spec)
    return overlap_add(ifft2(y_spec).real, layer, h)


def spatial_conv_oracle(x: np.ndarray, w: np.ndarray, stride: int = 1, padding: int = 0) -> np.ndarray:
    """Direct sliding-window true convolution, summed over input channels."""
    x = np.asarray(x, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    _check_activations(x)
    if w.ndim != 4 or w.shape[1] != x.shape[1]:
        raise SizeError(f"kernel shape {w.shape} does not match input channels {x.shape[1]}")
    b, ci, h, _ = x.shape
    co, _, hk, _ = w.shape
    out = (h + 2 * padding - hk) // stride + 1
    if out < 1:
        raise SizeError("kernel larger than padded input")
    xp = np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    flipped = w[..., ::-1, ::-1]
    y = np.zeros((b, co, out, out))
    span = stride * (out - 1) + 1
    for a in range(hk):
        for d in range(hk):
            patch = xp[:, :, a:a + span:stride, d:d + span:stride]
            y += np.einsum("bihw,ji->bjhw", patch, flipped[:, :, a, d])
    return y


def conv_mac_counts(h_act: int, layer: ConvLayerSpec, nonzeros: int | None = None) -> tuple[int, int]:
    """(spatial MACs, spectral Hadamard complex MACs) for one image through one layer.

    ``nonzeros`` is the number of kept entries per spectral kernel map (defaults to n^2).
    """
    k = layer.n * layer.n if nonzeros is None else nonzeros
    out = layer.output_size(h_act)
    spatial = out * out * layer.c_in * layer.c_out * layer.h_krn ** 2
    spectral = layer.num_tiles(h_act) ** 2 * layer.c_in * layer.c_out * k
    return spatial, spectral
