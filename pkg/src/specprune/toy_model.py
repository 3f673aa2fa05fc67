"""Toy LeNet-style spectral CNN used for ADMM pruning experiments.

spectral-conv(1 -> 8) -> ReLU -> 2x2 max-pool -> spectral-conv(8 -> 16) -> ReLU
-> 2x2 max-pool -> dense(-> 10) -> softmax cross-entropy.

Parameters live in a flat dict of real arrays: ``conv{l}.re`` / ``conv{l}.im``
(c_out, c_in, n, n) for the spectral kernels, ``fc.w`` and ``fc.b`` for the head.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np

from . import autodiff as ad
from .spectral_core import ConvLayerSpec, to_spectral_kernels

Params = dict[str, np.ndarray]
Gradients = dict[str, np.ndarray]


@dataclass(frozen=True)
class ToyModelSpec:
    image_size: int = 28
    channels: tuple[int, ...] = (8, 16)
    h_krn: int = 5
    n: int = 8
    padding: int = 0
    num_classes: int = 10
    in_channels: int = 1

    def conv_layers(self) -> list[ConvLayerSpec]:
        ins = (self.in_channels,) + tuple(self.channels[:-1])
        return [ConvLayerSpec(ci, co, self.h_krn, self.n, 1, self.padding) for ci, co in zip(ins, self.channels)]

    def feature_size(self) -> int:
        h = self.image_size
        for layer in self.conv_layers():
            h = layer.output_size(h)
            if h % 2:
                raise ValueError(f"conv output {h} is odd; cannot 2x2 pool")
            h //= 2
        return h * h * self.channels[-1]

    def conv_names(self) -> list[str]:
        return [f"conv{l + 1}" for l in range(len(self.channels))]

    def to_json(self) -> str:
        return json.dumps(asdict(self))

    @classmethod
    def from_json(cls, text: str) -> "ToyModelSpec":
        d = json.loads(text)
        d["channels"] = tuple(d["channels"])
        return cls(**d)


MNIST_TOY = ToyModelSpec()
SYNTHETIC_TOY = ToyModelSpec(image_size=8, padding=2)


def init_params(spec: ToyModelSpec, rng: np.random.Generator, spectral_init: str = "fft") -> Params:
    """Initial parameters with a small dense head.

    ``spectral_init="fft"`` converts He-initialized h_krn x h_krn spatial kernels;
    ``"random"`` draws every spectral entry independently with the same variance,
    which gives kernels with full n x n spatial support.
    """
    params: Params = {}
    for name, layer in zip(spec.conv_names(), spec.conv_layers()):
        fan_in = layer.c_in * layer.h_krn ** 2
        std = np.sqrt(2.0 / fan_in)
        if spectral_init == "fft":
            w = rng.standard_normal((layer.c_out, layer.c_in, layer.h_krn, layer.h_krn)) * std
            w_spec = to_spectral_kernels(w, spec.n)
        elif spectral_init == "random":
            shape = (layer.c_out, layer.c_in, spec.n, spec.n)
            scale = std * layer.h_krn / np.sqrt(2.0)
            w_spec = scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))
        else:
            raise ValueError(f"unknown spectral_init {spectral_init!r}")
        params[f"{name}.re"] = w_spec.real.copy()
        params[f"{name}.im"] = w_spec.imag.copy()
    feat = spec.feature_size()
    params["fc.w"] = rng.standard_normal((feat, spec.num_classes)) * np.sqrt(1.0 / feat)
    params["fc.b"] = np.zeros(spec.num_classes)
    return params


def spectral_kernels(params: Params, name: str) -> np.ndarray:
    return params[f"{name}.re"] + 1j * params[f"{name}.im"]


def set_spectral_kernels(params: Params, name: str, w_spec: np.ndarray) -> None:
    params[f"{name}.re"] = w_spec.real.copy()
    params[f"{name}.im"] = w_spec.imag.copy()


@dataclass
class ForwardCache:
    loss: ad.Node
    logits: ad.Node
    leaves: dict[str, ad.Node]


def _graph(spec: ToyModelSpec, params: Params, x: np.ndarray, labels: np.ndarray) -> ForwardCache:
    leaves = {k: ad.leaf(v, k) for k, v in params.items()}
    h = ad.constant(x)
    for name, layer in zip(spec.conv_names(), spec.conv_layers()):
        h = ad.spectral_conv(h, leaves[f"{name}.re"], leaves[f"{name}.im"], layer)
        h = ad.max_pool2(ad.relu(h))
    logits = ad.dense(ad.flatten(h), leaves["fc.w"], leaves["fc.b"])
    loss = ad.softmax_cross_entropy(logits, labels)
    return ForwardCache(loss, logits, leaves)


def _check_batch(spec: ToyModelSpec, x: np.ndarray, labels: np.ndarray | None) -> None:
    want = (spec.in_channels, spec.image_size, spec.image_size)
    if x.ndim != 4 or x.shape[1:] != want:
        raise ValueError(f"batch shape {x.shape} does not match model input (b, {want})")
    if labels is not None and labels.shape != (x.shape[0],):
        raise ValueError(f"labels shape {labels.shape} does not match batch of {x.shape[0]}")


def forward_loss(spec: ToyModelSpec, params: Params, x: np.ndarray, labels: np.ndarray) -> tuple[float, ForwardCache]:
    _check_batch(spec, x, labels)
    cache = _graph(spec, params, x, labels)
    return float(cache.loss.value), cache


def backward(cache: ForwardCache | None, loss_scale: float = 1.0) -> Gradients:
    if cache is None:
        raise ValueError("backward needs the cache returned by forward_loss")
    ad.backward(cache.loss, seed=loss_scale)
    return {k: (v.grad if v.grad is not None else np.zeros_like(v.value)) for k, v in cache.leaves.items()}


def logits(spec: ToyModelSpec, params: Params, x: np.ndarray) -> np.ndarray:
    _check_batch(spec, x, None)
    return _graph(spec, params, x, np.zeros(x.shape[0], dtype=np.int64)).logits.value


def accuracy(spec: ToyModelSpec, params: Params, x: np.ndarray, y: np.ndarray, batch: int = 250) -> float:
    hits = 0
    for lo in range(0, len(y), batch):
        hits += int((logits(spec, params, x[lo:lo + batch]).argmax(axis=1) == y[lo:lo + batch]).sum())
    return hits / len(y)


def save_model(path, spec: ToyModelSpec, params: Params) -> None:
    np.savez(path, __spec__=np.array(spec.to_json()), **params)


def load_model(path) -> tuple[ToyModelSpec, Params]:
    with np.load(path) as data:
        spec = ToyModelSpec.from_json(str(data["__spec__"]))
        params = {k: data[k].copy() for k in data.files if k != "__spec__"}
    return spec, params
