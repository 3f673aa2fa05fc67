"""ADMM training, hard pruning and masked re-training of spectral kernels.

The pruning constraint is per kernel map: after pruning every (j, i) map of
an n x n spectral kernel keeps exactly floor(n^2 / alpha) entries, which is
what the hardware schedule needs (equal stream lengths).
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import toy_model as tm
from .mnist import Dataset
from .sparse_format import SparseSpectralKernelSet, keep_count, project_topk

log = logging.getLogger(__name__)


class TrainingDiverged(RuntimeError):
    pass


class MaskViolation(AssertionError):
    pass


@dataclass
class AdmmConfig:
    alpha: float = 4.0
    rho: float = 0.1
    lr: float = 0.05  # eta, ADMM phase
    lr_retrain: float = 0.05  # eta'
    gamma: float = 0.8  # learning-rate decay per `decay_every` epochs
    decay_every: int = 20
    iterations: int = 10  # i_max
    epochs_per_w_update: int = 2
    retrain_epochs: int = 20  # i_max'
    batch_size: int = 32
    early_stop_tol: float = 1e-4
    rho_multiplier: float = 1.0  # rho <- rho * multiplier after each iteration
    seed: int = 0


@dataclass
class AdmmState:
    """Z~ and U~ per pruned conv layer; W~ lives in the model parameters."""

    Z: dict[str, np.ndarray]
    U: dict[str, np.ndarray]
    k: int
    rho: float
    epoch: int = 0

    @classmethod
    def initial(cls, spec: tm.ToyModelSpec, params: tm.Params, alpha: float, rho: float) -> "AdmmState":
        z = {name: np.zeros_like(tm.spectral_kernels(params, name)) for name in spec.conv_names()}
        u = {name: np.zeros_like(v) for name, v in z.items()}
        return cls(z, u, keep_count(spec.n, alpha), rho)

    def penalty(self, params: tm.Params) -> float:
        """sum over layers of ||W~ - Z~ + U~||_F^2."""
        return float(sum(np.sum(np.abs(tm.spectral_kernels(params, l) - self.Z[l] + self.U[l]) ** 2) for l in self.Z))

    def w_z_distance(self, params: tm.Params) -> float:
        return math.sqrt(sum(np.sum(np.abs(tm.spectral_kernels(params, l) - self.Z[l]) ** 2) for l in self.Z))


def _lr_at(base: float, epoch: int, cfg: AdmmConfig) -> float:
    return base * cfg.gamma ** (epoch // cfg.decay_every)


def sgd_epoch(
    spec: tm.ToyModelSpec,
    params: tm.Params,
    data: Dataset,
    lr: float,
    batch_size: int,
    rng: np.random.Generator,
    extra_grad=None,
    grad_mask: dict[str, np.ndarray] | None = None,
    after_step=None,
) -> float:
    """One shuffled pass of minibatch SGD, in place. Returns the mean batch loss.

    ``extra_grad(params) -> dict`` adds regularizer gradients; ``grad_mask`` zeroes
    gradient entries outside the mask (keys are parameter names); ``after_step(params)``
    runs after every update.
    """
    order = rng.permutation(len(data))
    total, batches = 0.0, 0
    for lo in range(0, len(order), batch_size):
        idx = order[lo:lo + batch_size]
        loss, cache = tm.forward_loss(spec, params, data.x[idx], data.y[idx])
        if not math.isfinite(loss):
            raise TrainingDiverged(f"non-finite loss {loss} at batch {batches}")
        grads = tm.backward(cache)
        if extra_grad is not None:
            for key, g in extra_grad(params).items():
                grads[key] = grads[key] + g
        if grad_mask is not None:
            for key, m in grad_mask.items():
                grads[key] = grads[key] * m
        for key, g in grads.items():
            params[key] -= lr * g
        if after_step is not None:
            after_step(params)
        total += loss
        batches += 1
    return total / max(batches, 1)


def train_dense(
    spec: tm.ToyModelSpec,
    params: tm.Params,
    data: Dataset,
    epochs: int,
    lr: float,
    cfg: AdmmConfig | None = None,
    rng: np.random.Generator | None = None,
) -> list[float]:
    """Plain SGD training (the unpruned baseline). Returns per-epoch mean losses."""
    cfg = cfg or AdmmConfig()
    rng = rng or np.random.default_rng(cfg.seed)
    losses = []
    for epoch in range(epochs):
        losses.append(sgd_epoch(spec, params, data, _lr_at(lr, epoch, cfg), cfg.batch_size, rng))
    return losses


def _penalty_grad(state: AdmmState):
    def grads(params):
        out = {}
        for name in state.Z:
            d = state.rho * (tm.spectral_kernels(params, name) - state.Z[name] + state.U[name])
            out[f"{name}.re"] = d.real
            out[f"{name}.im"] = d.imag
        return out

    return grads


def admm_w_update(
    state: AdmmState,
    spec: tm.ToyModelSpec,
    params: tm.Params,
    data: Dataset,
    epochs: int,
    cfg: AdmmConfig,
    rng: np.random.Generator,
) -> list[float]:
    """Minimize Loss + sum rho/2 ||W~ - Z~ + U~||^2 over W~ by SGD, Z~ and U~ held fixed.

    Stops early once the epoch loss moves by less than ``cfg.early_stop_tol``.
    Returns per-epoch mean objective values.
    """
    losses = []
    for _ in range(epochs):
        lr = _lr_at(cfg.lr, state.epoch, cfg)
        loss = sgd_epoch(spec, params, data, lr, cfg.batch_size, rng, extra_grad=_penalty_grad(state))
        state.epoch += 1
        obj = loss + 0.5 * state.rho * state.penalty(params)
        if not math.isfinite(obj):
            raise TrainingDiverged(f"ADMM objective became {obj} at epoch {state.epoch}")
        losses.append(obj)
        if len(losses) > 1 and abs(losses[-1] - losses[-2]) < cfg.early_stop_tol:
            break
    return losses


def admm_z_update(state: AdmmState, params: tm.Params) -> None:
    """Z~ <- per-map top-k projection of W~ + U~."""
    for name in state.Z:
        state.Z[name] = project_topk(tm.spectral_kernels(params, name) + state.U[name], state.k)


def admm_u_update(state: AdmmState, params: tm.Params) -> None:
    """U~ <- U~ + W~ - Z~."""
    for name in state.U:
        state.U[name] = state.U[name] + tm.spectral_kernels(params, name) - state.Z[name]


def hard_prune(w_spec: np.ndarray, alpha: float) -> SparseSpectralKernelSet:
    """Keep the floor(n^2/alpha) largest-modulus entries of every map."""
    return SparseSpectralKernelSet.from_dense(w_spec, alpha=alpha)


def prune_params(spec: tm.ToyModelSpec, params: tm.Params, alpha: float) -> tuple[list[SparseSpectralKernelSet], dict[str, np.ndarray]]:
    """Hard-prune every conv layer in place; returns the sparse sets and boolean masks."""
    sets, masks = [], {}
    for name in spec.conv_names():
        ks = hard_prune(tm.spectral_kernels(params, name), alpha)
        tm.set_spectral_kernels(params, name, ks.to_dense())
        sets.append(ks)
        masks[name] = ks.mask()
    return sets, masks


def retrain(
    spec: tm.ToyModelSpec,
    params: tm.Params,
    masks: dict[str, np.ndarray],
    data: Dataset,
    epochs: int,
    cfg: AdmmConfig,
    rng: np.random.Generator,
    on_epoch=None,
) -> list[SparseSpectralKernelSet]:
    """Masked SGD: only the surviving spectral entries move. Returns the final sparse sets."""
    grad_mask = {}
    for name, m in masks.items():
        grad_mask[f"{name}.re"] = m.astype(np.float64)
        grad_mask[f"{name}.im"] = m.astype(np.float64)

    def check(p):
        for name, m in masks.items():
            if np.any(p[f"{name}.re"][~m] != 0) or np.any(p[f"{name}.im"][~m] != 0):
                raise MaskViolation(f"{name}: non-zero outside the pruning mask during retraining")

    check(params)
    for epoch in range(epochs):
        lr = _lr_at(cfg.lr_retrain, epoch, cfg)
        loss = sgd_epoch(spec, params, data, lr, cfg.batch_size, rng, grad_mask=grad_mask, after_step=check)
        if on_epoch is not None:
            on_epoch(epoch, loss)
    return [
        SparseSpectralKernelSet.from_masked(tm.spectral_kernels(params, name), masks[name])
        for name in spec.conv_names()
    ]


LOG_COLUMNS = ["iteration", "phase", "loss", "w_z_distance", "accuracy"]


@dataclass
class PruneResult:
    params: tm.Params
    kernels: list[SparseSpectralKernelSet]
    log: list[dict] = field(default_factory=list)
    accuracy: dict[str, float] = field(default_factory=dict)
    z_nnz: list[dict[str, np.ndarray]] = field(default_factory=list)  # per-map NNZ of Z~ per iteration
    admm_params: tm.Params | None = None  # W~_AD before hard pruning

    def write_log(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=LOG_COLUMNS)
            w.writeheader()
            for row in self.log:
                w.writerow(row)


def run_pruning(
    spec: tm.ToyModelSpec,
    params: tm.Params,
    train: Dataset,
    test: Dataset,
    cfg: AdmmConfig,
) -> PruneResult:
    """ADMM training, hard pruning and masked re-training of a trained dense model.

    ``params`` is not modified.
    """
    params = {k: v.copy() for k, v in params.items()}
    rng = np.random.default_rng(cfg.seed)
    state = AdmmState.initial(spec, params, cfg.alpha, cfg.rho)
    result = PruneResult(params, [])

    def acc(p):
        return tm.accuracy(spec, p, test.x, test.y)

    result.accuracy["original"] = acc(params)
    result.log.append(dict(iteration=0, phase="original", loss="", w_z_distance="", accuracy=result.accuracy["original"]))
    for it in range(1, cfg.iterations + 1):
        losses = admm_w_update(state, spec, params, train, cfg.epochs_per_w_update, cfg, rng)
        admm_z_update(state, params)
        admm_u_update(state, params)
        result.z_nnz.append({l: np.count_nonzero(z.reshape(z.shape[:2] + (-1,)), axis=-1) for l, z in state.Z.items()})
        dist = state.w_z_distance(params)
        a = acc(params)
        result.log.append(dict(iteration=it, phase="admm", loss=losses[-1], w_z_distance=dist, accuracy=a))
        log.info("admm iter %d: objective %.4f  ||W-Z|| %.4f  acc %.4f", it, losses[-1], dist, a)
        state.rho *= cfg.rho_multiplier
    result.accuracy["admm"] = acc(params)
    result.admm_params = {k: v.copy() for k, v in params.items()}

    _, masks = prune_params(spec, params, cfg.alpha)
    result.accuracy["pruned"] = acc(params)
    result.log.append(dict(iteration=cfg.iterations + 1, phase="pruned", loss="", w_z_distance=0.0, accuracy=result.accuracy["pruned"]))

    def on_epoch(epoch, loss):
        result.log.append(dict(iteration=cfg.iterations + 2 + epoch, phase="retrain", loss=loss, w_z_distance=0.0, accuracy=acc(params)))

    result.kernels = retrain(spec, params, masks, train, cfg.retrain_epochs, cfg, rng, on_epoch=on_epoch)
    result.accuracy["retrained"] = acc(params)
    return result


def config_dict(cfg: AdmmConfig) -> dict:
    return asdict(cfg)
