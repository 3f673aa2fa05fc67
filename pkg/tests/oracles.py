"""Slow, obviously-correct reference implementations used only by the tests."""

import itertools
import math

import numpy as np

from specprune import dse


def naive_dft2(x):
    """Unnormalized 2-D DFT over the last two axes by explicit sums."""
    n = x.shape[-1]
    out = np.zeros(x.shape, dtype=np.complex128)
    for u in range(n):
        for v in range(n):
            acc = 0
            for r in range(n):
                for c in range(n):
                    acc = acc + x[..., r, c] * np.exp(-2j * np.pi * (u * r + v * c) / n)
            out[..., u, v] = acc
    return out


def scalar_conv(x, w, stride=1, padding=0):
    """True convolution (kernel flipped), one output element at a time."""
    b, ci, h, _ = x.shape
    co, _, hk, _ = w.shape
    xp = np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    out = (h + 2 * padding - hk) // stride + 1
    y = np.zeros((b, co, out, out))
    for bb in range(b):
        for j in range(co):
            for r in range(out):
                for c in range(out):
                    s = 0.0
                    for i in range(ci):
                        for u in range(hk):
                            for v in range(hk):
                                s += xp[bb, i, r * stride + u, c * stride + v] * w[j, i, hk - 1 - u, hk - 1 - v]
                    y[bb, j, r, c] = s
    return y


def best_k_sparse(m, k):
    """Exhaustive search over all k-subsets of entries for the closest k-sparse map."""
    flat = m.reshape(-1)
    best, best_err = None, math.inf
    for keep in itertools.combinations(range(flat.size), k):
        z = np.zeros_like(flat)
        z[list(keep)] = flat[list(keep)]
        err = float(np.sum(np.abs(flat - z) ** 2))
        if err < best_err - 1e-15:
            best, best_err = z, err
    return best.reshape(m.shape), best_err


def step_unique(indices):
    """Q_s as a Python list of set sizes."""
    return [len(set(int(a) for a in indices[:, s])) for s in range(indices.shape[1])]


def group_cycles(indices, R):
    return sum(-(-q // R) for q in step_unique(indices))


def reported_utilization_table(alpha=4.0, top=0.99):
    """Utilizations rising with R and saturating quickly (above 80% by R=8 even at
    P_o=128), pinned to `top` at (P_o=64, R=16)."""
    t = dse.UtilizationTable()
    for p in dse.powers_of_two(256):
        for r in (1, 2, 4, 8, 16):
            if r <= p:
                t.add(p, r, alpha, 1 - (1 - r / p) * math.exp(-r / 4))
    t.add(64, 16, alpha, top)
    return t
