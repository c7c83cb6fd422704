"""Minimal tape-free reverse-mode differentiation over numpy arrays.

Each :class:`Tensor` remembers its parents and a closure that pushes its
gradient back to them. Only the handful of operations the model needs are
provided.
"""

from __future__ import annotations

import warnings

import numpy as np


class Tensor:
    __slots__ = ("value", "grad", "parents", "backward_fn", "requires_grad")

    def __init__(self, value, parents=(), backward_fn=None, requires_grad=False):
        self.value = np.asarray(value, dtype=np.float64)
        self.grad = None
        self.parents = parents
        self.backward_fn = backward_fn
        self.requires_grad = requires_grad or any(p.requires_grad for p in parents)

    @property
    def shape(self):
        return self.value.shape

    def __repr__(self):
        return f"Tensor(shape={self.value.shape}, requires_grad={self.requires_grad})"

    def _accum(self, g):
        if not self.requires_grad:
            return
        self.grad = g if self.grad is None else self.grad + g

    def __add__(self, other):
        return add(self, other)

    def __matmul__(self, other):
        return matmul(self, other)


def param(value) -> Tensor:
    return Tensor(value, requires_grad=True)


def const(value) -> Tensor:
    return Tensor(value)


def backward(root: Tensor):
    """Accumulate d(root)/d(leaf) into ``.grad`` of every leaf that requires it."""
    order, seen = [], set()
    stack = [(root, False)]
    while stack:
        node, done = stack.pop()
        if done:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        stack.extend((p, False) for p in node.parents if p.requires_grad)
    root.grad = np.ones_like(root.value)
    for node in reversed(order):
        if node.backward_fn is not None and node.grad is not None:
            node.backward_fn(node.grad)


def add(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise sum; ``b`` may be a row vector broadcast over rows of ``a``."""
    out = Tensor(a.value + b.value, (a, b))

    def back(g):
        a._accum(g)
        b._accum(g.sum(axis=0) if b.value.ndim < g.ndim else g)
    out.backward_fn = back
    return out


def add_n(terms: list[Tensor]) -> Tensor:
    out = Tensor(sum(t.value for t in terms), tuple(terms))

    def back(g):
        for t in terms:
            t._accum(g)
    out.backward_fn = back
    return out


def matmul(a: Tensor, b: Tensor) -> Tensor:
    out = Tensor(a.value @ b.value, (a, b))

    def back(g):
        a._accum(g @ b.value.T)
        b._accum(a.value.T @ g)
    out.backward_fn = back
    return out


def relu(a: Tensor) -> Tensor:
    mask = a.value > 0
    out = Tensor(a.value * mask, (a,))
    out.backward_fn = lambda g: a._accum(g * mask)
    return out


def tanh(a: Tensor) -> Tensor:
    y = np.tanh(a.value)
    out = Tensor(y, (a,))
    out.backward_fn = lambda g: a._accum(g * (1.0 - y * y))
    return out


def sigmoid(a: Tensor) -> Tensor:
    y = 0.5 * (1.0 + np.tanh(0.5 * a.value))
    out = Tensor(y, (a,))
    out.backward_fn = lambda g: a._accum(g * y * (1.0 - y))
    return out


def concat(parts: list[Tensor]) -> Tensor:
    widths = [p.value.shape[1] for p in parts]
    out = Tensor(np.concatenate([p.value for p in parts], axis=1), tuple(parts))

    def back(g):
        start = 0
        for p, w in zip(parts, widths):
            p._accum(g[:, start:start + w])
            start += w
    out.backward_fn = back
    return out


def gather(a: Tensor, index: np.ndarray) -> Tensor:
    """Rows ``a[index]``."""
    out = Tensor(a.value[index], (a,))

    def back(g):
        full = np.zeros_like(a.value)
        np.add.at(full, index, g)
        a._accum(full)
    out.backward_fn = back
    return out


def scatter_sum(a: Tensor, index: np.ndarray, size: int) -> Tensor:
    """``out[index[k]] += a[k]`` into ``size`` rows."""
    val = np.zeros((size,) + a.value.shape[1:])
    np.add.at(val, index, a.value)
    out = Tensor(val, (a,))
    out.backward_fn = lambda g: a._accum(g[index])
    return out


def reshape(a: Tensor, shape) -> Tensor:
    out = Tensor(a.value.reshape(shape), (a,))
    out.backward_fn = lambda g: a._accum(g.reshape(a.value.shape))
    return out


def cosine_rows(a: Tensor, b: Tensor, eps: float = 1e-12) -> Tensor:
    """Row-wise cosine similarity; rows with a zero-norm side give 0."""
    na = np.linalg.norm(a.value, axis=1)
    nb = np.linalg.norm(b.value, axis=1)
    ok = (na > eps) & (nb > eps)
    if not ok.all():
        warnings.warn("zero-norm embedding in cosine similarity; using 0", RuntimeWarning,
                      stacklevel=2)
    na_s = np.where(ok, na, 1.0)
    nb_s = np.where(ok, nb, 1.0)
    dot = np.einsum("ij,ij->i", a.value, b.value)
    cos = np.where(ok, dot / (na_s * nb_s), 0.0)
    out = Tensor(cos, (a, b))

    def back(g):
        g = np.where(ok, g, 0.0)[:, None]
        ga = b.value / (na_s * nb_s)[:, None] - cos[:, None] * a.value / (na_s ** 2)[:, None]
        gb = a.value / (na_s * nb_s)[:, None] - cos[:, None] * b.value / (nb_s ** 2)[:, None]
        a._accum(g * ga)
        b._accum(g * gb)
    out.backward_fn = back
    return out


def affine(a: Tensor, scale: float, shift: float) -> Tensor:
    out = Tensor(a.value * scale + shift, (a,))
    out.backward_fn = lambda g: a._accum(g * scale)
    return out


def bce(prob: Tensor, target: np.ndarray, eps: float = 1e-7) -> Tensor:
    """Mean binary cross entropy with probabilities clamped to [eps, 1-eps]."""
    p = prob.value
    clipped = np.clip(p, eps, 1.0 - eps)
    inside = (p > eps) & (p < 1.0 - eps)
    t = np.asarray(target, dtype=np.float64)
    n = p.size
    loss = -np.mean(t * np.log(clipped) + (1.0 - t) * np.log(1.0 - clipped))
    out = Tensor(loss, (prob,))

    def back(g):
        dp = (-(t / clipped) + (1.0 - t) / (1.0 - clipped)) / n
        prob._accum(g * dp * inside)
    out.backward_fn = back
    return out


def scale(a: Tensor, factor: float) -> Tensor:
    out = Tensor(a.value * factor, (a,))
    out.backward_fn = lambda g: a._accum(g * factor)
    return out


def dropout(a: Tensor, rate: float, rng: np.random.Generator) -> Tensor:
    if rate <= 0.0:
        return a
    keep = (rng.random(a.value.shape) >= rate) / (1.0 - rate)
    out = Tensor(a.value * keep, (a,))
    out.backward_fn = lambda g: a._accum(g * keep)
    return out
