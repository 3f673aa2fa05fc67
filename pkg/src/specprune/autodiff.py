"""A small tape-free reverse-mode differentiation engine over numpy arrays.

Every op returns a :class:`Node` holding its value, its parent nodes and a
closure mapping the output gradient to one gradient per parent. Complex
spectral kernels enter as two real nodes (real and imaginary parts), so
all gradients here are real arrays.
"""

from __future__ import annotations

import numpy as np

from . import spectral_core as sc


class Node:
    __slots__ = ("value", "parents", "vjp", "grad", "name", "requires_grad")

    def __init__(self, value, parents=(), vjp=None, name=None, requires_grad=None):
        self.value = value
        self.parents = parents
        self.vjp = vjp
        self.grad = None
        self.name = name
        if requires_grad is None:
            requires_grad = any(p.requires_grad for p in parents)
        self.requires_grad = requires_grad

    @property
    def shape(self):
        return np.shape(self.value)

    def __repr__(self):
        return f"Node({self.name or 'op'}, shape={self.shape})"


def leaf(value, name=None) -> Node:
    """A trainable input."""
    return Node(np.asarray(value, dtype=np.float64), name=name, requires_grad=True)


def constant(value) -> Node:
    return Node(np.asarray(value, dtype=np.float64), requires_grad=False)


def _toposort(root: Node) -> list[Node]:
    order, seen, stack = [], set(), [(root, False)]
    while stack:
        node, done = stack.pop()
        if done:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node.parents:
            if id(p) not in seen:
                stack.append((p, False))
    return order


def backward(root: Node, seed=1.0) -> None:
    """Fill ``.grad`` of every node reachable from ``root`` (leaves not reached keep None).

    ``seed`` is the output gradient: a scalar, or an array broadcastable to the root.
    """
    order = _toposort(root)
    for node in order:
        node.grad = None
    root.grad = np.broadcast_to(np.asarray(seed, dtype=np.float64), np.shape(root.value)).copy()
    for node in reversed(order):
        if node.vjp is None or node.grad is None or not node.requires_grad:
            continue
        for parent, g in zip(node.parents, node.vjp(node.grad)):
            if g is None:
                continue
            parent.grad = g if parent.grad is None else parent.grad + g


# -- ops ------------------------------------------------------------------------


def add(a: Node, b: Node) -> Node:
    return Node(a.value + b.value, (a, b), lambda g: (g, g))


def scale(a: Node, c: float) -> Node:
    return Node(a.value * c, (a,), lambda g: (g * c,))


def relu(a: Node) -> Node:
    mask = a.value > 0
    return Node(np.where(mask, a.value, 0.0), (a,), lambda g: (g * mask,))


def max_pool2(a: Node) -> Node:
    """2 x 2 max pooling with stride 2 over the last two axes (first maximum wins)."""
    b, c, h, w = a.value.shape
    if h % 2 or w % 2:
        raise ValueError(f"max_pool2 needs even spatial size, got {h}x{w}")
    win = a.value.reshape(b, c, h // 2, 2, w // 2, 2).transpose(0, 1, 2, 4, 3, 5).reshape(b, c, h // 2, w // 2, 4)
    arg = win.argmax(axis=-1)
    out = np.take_along_axis(win, arg[..., None], axis=-1)[..., 0]

    def vjp(g):
        gw = np.zeros_like(win)
        np.put_along_axis(gw, arg[..., None], g[..., None], axis=-1)
        gw = gw.reshape(b, c, h // 2, w // 2, 2, 2).transpose(0, 1, 2, 4, 3, 5).reshape(b, c, h, w)
        return (gw,)

    return Node(out, (a,), vjp)


def flatten(a: Node) -> Node:
    shape = a.value.shape
    return Node(a.value.reshape(shape[0], -1), (a,), lambda g: (g.reshape(shape),))


def dense(x: Node, w: Node, bias: Node) -> Node:
    out = x.value @ w.value + bias.value
    return Node(out, (x, w, bias), lambda g: (g @ w.value.T, x.value.T @ g, g.sum(axis=0)))


def softmax_cross_entropy(logits: Node, labels: np.ndarray) -> Node:
    """Mean cross-entropy of integer labels under softmax(logits)."""
    z = logits.value - logits.value.max(axis=1, keepdims=True)
    logp = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    nb = z.shape[0]
    loss = -logp[np.arange(nb), labels].mean()

    def vjp(g):
        p = np.exp(logp)
        p[np.arange(nb), labels] -= 1.0
        return (g * p / nb,)

    return Node(np.asarray(loss), (logits,), vjp)


def spectral_conv(x: Node, w_re: Node, w_im: Node, layer: sc.ConvLayerSpec) -> Node:
    """Differentiable :func:`spectral_core.spectral_conv` with kernels W~ = w_re + 1j * w_im."""
    xv = x.value
    h = xv.shape[-1]
    layer.check_input(h)
    w = w_re.value + 1j * w_im.value
    x_spec = sc.tile_spectra(xv, layer)
    y = sc.overlap_add(sc.ifft2(sc.hadamard_reduce(x_spec, w)).real, layer, h)
    n = layer.n

    def vjp(g):
        # Re(ifft2(.)) has adjoint fft2(.) / n^2 on real gradients
        g_tiles = sc.fft2(sc.overlap_add_adjoint(g, layer, h)) / (n * n)
        b, co, t = g_tiles.shape[:3]
        ci = w.shape[1]
        gs = g_tiles.transpose(4, 5, 0, 2, 3, 1).reshape(n * n, b * t * t, co)
        xs = x_spec.transpose(4, 5, 0, 2, 3, 1).reshape(n * n, b * t * t, ci)
        gw = np.matmul(xs.conj().transpose(0, 2, 1), gs)  # (n^2, ci, co)
        gw = gw.reshape(n, n, ci, co).transpose(3, 2, 0, 1)
        gx = None
        if x.requires_grad:
            ws = w.transpose(2, 3, 1, 0).reshape(n * n, ci, co)
            gxs = np.matmul(gs, ws.conj().transpose(0, 2, 1))  # (n^2, b*T*T, ci)
            gxs = gxs.reshape(n, n, b, t, t, ci).transpose(2, 5, 3, 4, 0, 1)
            gx = sc.tile_spectra_adjoint(gxs, layer, h)
        return gx, gw.real.copy(), gw.imag.copy()

    return Node(y, (x, w_re, w_im), vjp)
