"""Minimal reverse-mode differentiation over numpy arrays.

A Value wraps a float64 ndarray plus a backward closure per parent. The
primitive set is exactly what the contour losses and the GCN cascade need;
feature maps passed to bilinear_gather are treated as constants (the encoder
is fixed), so gradients flow only to sampling positions.
"""
from __future__ import annotations

import numpy as np

from . import imaging
from .errors import DoubleBackward, NonScalarLoss, ShapeMismatch


class Value:
    """Node in the computation tape."""

    __slots__ = ("data", "grad", "_parents", "_vjps", "requires_grad", "_spent")

    def __init__(self, data, parents=(), vjps=(), requires_grad=True):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self._parents = tuple(parents)
        self._vjps = tuple(vjps)
        self.requires_grad = requires_grad
        self._spent = False

    @property
    def shape(self):
        return self.data.shape

    def grad_or_zero(self) -> np.ndarray:
        """Accumulated gradient, or zeros if this node never saw backward."""
        return self.grad if self.grad is not None else np.zeros_like(self.data)

    # -- graph plumbing ----------------------------------------------------

    def _topo(self):
        order, seen, stack = [], set(), [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                stack.append((p, False))
        return order

    def backward(self):
        if self.data.shape != ():
            raise NonScalarLoss(f"loss must be scalar, got shape {self.data.shape}")
        if self._spent:
            raise DoubleBackward("backward() already called on this tape")
        self._spent = True
        order = self._topo()
        for node in order:
            node.grad = np.zeros_like(node.data)
        self.grad = np.ones_like(self.data)
        for node in reversed(order):
            if node.grad is None:
                continue
            for parent, vjp in zip(node._parents, node._vjps):
                if parent.requires_grad or parent._parents:
                    parent.grad = parent.grad + vjp(node.grad)

    # -- operator sugar ----------------------------------------------------

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __sub__(self, other):
        return add(self, mul(other, -1.0))

    def __rsub__(self, other):
        return add(mul(self, -1.0), other)

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, key):
        return slice_(self, key)


def as_value(x) -> Value:
    if isinstance(x, Value):
        return x
    return Value(x, requires_grad=False)


def _unbroadcast(grad: np.ndarray, shape) -> np.ndarray:
    """Sum grad down to the given shape (inverse of numpy broadcasting)."""
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


def add(a, b) -> Value:
    a, b = as_value(a), as_value(b)
    try:
        out = a.data + b.data
    except ValueError as e:
        raise ShapeMismatch(str(e)) from None
    return Value(out, (a, b),
                 (lambda g: _unbroadcast(g, a.data.shape),
                  lambda g: _unbroadcast(g, b.data.shape)))


def mul(a, b) -> Value:
    a, b = as_value(a), as_value(b)
    try:
        out = a.data * b.data
    except ValueError as e:
        raise ShapeMismatch(str(e)) from None
    return Value(out, (a, b),
                 (lambda g: _unbroadcast(g * b.data, a.data.shape),
                  lambda g: _unbroadcast(g * a.data, b.data.shape)))


def matmul(a, b) -> Value:
    a, b = as_value(a), as_value(b)
    if a.data.ndim != 2 or b.data.ndim != 2 or a.data.shape[1] != b.data.shape[0]:
        raise ShapeMismatch(f"matmul {a.data.shape} @ {b.data.shape}")
    return Value(a.data @ b.data, (a, b),
                 (lambda g: g @ b.data.T,
                  lambda g: a.data.T @ g))


def relu(a) -> Value:
    a = as_value(a)
    mask = a.data > 0
    return Value(np.where(mask, a.data, 0.0), (a,), (lambda g: g * mask,))


def clamp_min(a, lo: float) -> Value:
    a = as_value(a)
    mask = a.data > lo
    return Value(np.where(mask, a.data, lo), (a,), (lambda g: g * mask,))


def concat(values, axis: int = 0) -> Value:
    values = [as_value(v) for v in values]
    out = np.concatenate([v.data for v in values], axis=axis)
    sizes = [v.data.shape[axis] for v in values]
    offsets = np.concatenate([[0], np.cumsum(sizes)])

    def make_vjp(i):
        sl = [slice(None)] * out.ndim
        sl[axis] = slice(int(offsets[i]), int(offsets[i + 1]))
        sl = tuple(sl)
        return lambda g: g[sl]

    return Value(out, tuple(values), tuple(make_vjp(i) for i in range(len(values))))


def slice_(a, key) -> Value:
    a = as_value(a)
    out = a.data[key]

    def vjp(g):
        full = np.zeros_like(a.data)
        np.add.at(full, key, g)
        return full

    return Value(out, (a,), (vjp,))


def sum_(a, axis=None) -> Value:
    a = as_value(a)
    out = a.data.sum(axis=axis)

    def vjp(g):
        if axis is None:
            return np.broadcast_to(g, a.data.shape).copy()
        return np.broadcast_to(np.expand_dims(g, axis), a.data.shape).copy()

    return Value(out, (a,), (vjp,))


def mean(a, axis=None) -> Value:
    a = as_value(a)
    count = a.data.size if axis is None else a.data.shape[axis]
    return mul(sum_(a, axis=axis), 1.0 / count)


def l1_norm(a) -> Value:
    """Sum of absolute values; subgradient sign(x), 0 at x == 0."""
    a = as_value(a)
    return Value(np.abs(a.data).sum(), (a,), (lambda g: g * np.sign(a.data),))


def l2_norm(a) -> Value:
    """Euclidean norm of the flattened tensor; subgradient 0 at the origin."""
    a = as_value(a)
    nrm = float(np.sqrt((a.data ** 2).sum()))

    def vjp(g):
        if nrm == 0.0:
            return np.zeros_like(a.data)
        return g * a.data / nrm

    return Value(nrm, (a,), (vjp,))


def sqrt(a) -> Value:
    """Elementwise square root; derivative defined as 0 at x == 0."""
    a = as_value(a)
    root = np.sqrt(np.maximum(a.data, 0.0))

    def vjp(g):
        safe = np.where(root > 0, root, 1.0)
        return g * np.where(root > 0, 0.5 / safe, 0.0)

    return Value(root, (a,), (vjp,))


def log(a) -> Value:
    a = as_value(a)
    return Value(np.log(a.data), (a,), (lambda g: g / a.data,))


def bilinear_gather(feature_map: np.ndarray, points: Value) -> Value:
    """Differentiably sample a constant (H, W[, C]) map at (M, 2) point Value.

    Gradients propagate to the point coordinates only; the map is constant.
    """
    points = as_value(points)
    if points.data.ndim != 2 or points.data.shape[1] != 2:
        raise ShapeMismatch(f"points must be (M, 2), got {points.data.shape}")
    vals, jac = imaging.bilinear_sample_many(feature_map, points.data)

    def vjp(g):
        if jac.ndim == 2:  # scalar map: vals (M,), jac (M, 2)
            return g[:, None] * jac
        return np.einsum("mc,mcd->md", g, jac)

    return Value(vals, (points,), (vjp,))
