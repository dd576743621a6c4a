"""Minimal reverse-mode differentiation on numpy arrays.

The network in this package is small enough that a hand-rolled tape beats
pulling in a framework: double precision throughout, every operation's
vector-Jacobian product is explicit, and the finite-difference harness in
:mod:`promptrack.losses` checks all of them.

Every op accepts either :class:`Var` or plain arrays.  When no ``Var`` is
involved the op falls through to numpy (or the matching kernel in
:mod:`promptrack.tensorops`), so forward passes are written once and run
gradient-free at inference.
"""

from __future__ import annotations

import numpy as np

from . import tensorops


class Var:
    """A value in the computation graph."""

    __slots__ = ("value", "grad", "_parents", "_vjp")

    def __init__(self, value, parents=(), vjp=None):
        self.value = np.asarray(value, dtype=np.float64)
        self.grad = None
        self._parents = parents
        self._vjp = vjp

    @property
    def shape(self):
        return self.value.shape

    def __repr__(self):
        return f"Var(shape={self.value.shape})"

    __add__ = lambda self, other: add(self, other)
    __radd__ = lambda self, other: add(other, self)
    __sub__ = lambda self, other: sub(self, other)
    __rsub__ = lambda self, other: sub(other, self)
    __mul__ = lambda self, other: mul(self, other)
    __rmul__ = lambda self, other: mul(other, self)
    __truediv__ = lambda self, other: div(self, other)
    __matmul__ = lambda self, other: matmul(self, other)
    __neg__ = lambda self: mul(self, -1.0)

    def __getitem__(self, key):
        return take(self, key)


def value_of(x) -> np.ndarray:
    return x.value if isinstance(x, Var) else np.asarray(x, dtype=np.float64)


def is_var(*xs) -> bool:
    return any(isinstance(x, Var) for x in xs)


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum ``grad`` down to ``shape`` to undo numpy broadcasting."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


def _node(value, inputs, grads_fn) -> Var:
    """Create a graph node; ``grads_fn(g)`` yields one grad per input."""
    parents = tuple(x for x in inputs if isinstance(x, Var))
    if not parents:
        return value

    def vjp(g):
        all_grads = grads_fn(g)
        return [gr for x, gr in zip(inputs, all_grads) if isinstance(x, Var)]

    return Var(value, parents, vjp)


def backward(root: Var, seed=None) -> None:
    """Accumulate gradients of ``root`` into every reachable Var's ``.grad``."""
    order, seen, stack = [], set(), [(root, False)]
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
    root.grad = np.ones_like(root.value) if seed is None else np.asarray(seed, dtype=np.float64)
    for node in reversed(order):
        if node._vjp is None or node.grad is None:
            continue
        for parent, g in zip(node._parents, node._vjp(node.grad)):
            if g is None:
                continue
            parent.grad = g if parent.grad is None else parent.grad + g


def add(a, b):
    av, bv = value_of(a), value_of(b)
    if not is_var(a, b):
        return av + bv
    return _node(av + bv, (a, b), lambda g: (_unbroadcast(g, av.shape), _unbroadcast(g, bv.shape)))


def sub(a, b):
    av, bv = value_of(a), value_of(b)
    if not is_var(a, b):
        return av - bv
    return _node(av - bv, (a, b), lambda g: (_unbroadcast(g, av.shape), _unbroadcast(-g, bv.shape)))


def mul(a, b):
    av, bv = value_of(a), value_of(b)
    if not is_var(a, b):
        return av * bv
    return _node(
        av * bv,
        (a, b),
        lambda g: (_unbroadcast(g * bv, av.shape), _unbroadcast(g * av, bv.shape)),
    )


def div(a, b):
    av, bv = value_of(a), value_of(b)
    if not is_var(a, b):
        return av / bv
    return _node(
        av / bv,
        (a, b),
        lambda g: (_unbroadcast(g / bv, av.shape), _unbroadcast(-g * av / (bv * bv), bv.shape)),
    )


def matmul(a, b):
    av, bv = value_of(a), value_of(b)
    if not is_var(a, b):
        return tensorops.matmul(av, bv)
    tensorops.charge_flops(av.shape[0] * av.shape[1] * bv.shape[1])
    return _node(av @ bv, (a, b), lambda g: (g @ bv.T, av.T @ g))


def transpose(a):
    av = value_of(a)
    if not is_var(a):
        return av.T
    return _node(av.T, (a,), lambda g: (g.T,))


def take(a, key):
    """General indexing; duplicate indices accumulate in the backward pass."""
    av = value_of(a)
    if not is_var(a):
        return av[key]

    def grads(g):
        out = np.zeros_like(av)
        np.add.at(out, key, g)
        return (out,)

    return _node(av[key], (a,), grads)


def sum_(a, axis=None, keepdims=False):
    av = value_of(a)
    if not is_var(a):
        return av.sum(axis=axis, keepdims=keepdims)

    def grads(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, av.shape).copy(),)

    return _node(av.sum(axis=axis, keepdims=keepdims), (a,), grads)


def mean(a, axis=None, keepdims=False):
    av = value_of(a)
    n = av.size if axis is None else av.shape[axis]
    return mul(sum_(a, axis=axis, keepdims=keepdims), 1.0 / n)


def log(a):
    av = value_of(a)
    if not is_var(a):
        return np.log(av)
    return _node(np.log(av), (a,), lambda g: (g / av,))


def exp(a):
    av = value_of(a)
    out = np.exp(av)
    if not is_var(a):
        return out
    return _node(out, (a,), lambda g: (g * out,))


def sqrt(a):
    av = value_of(a)
    out = np.sqrt(av)
    if not is_var(a):
        return out
    return _node(out, (a,), lambda g: (g / (2.0 * out),))


def sigmoid(a):
    av = value_of(a)
    out = 1.0 / (1.0 + np.exp(-av))
    if not is_var(a):
        return out
    return _node(out, (a,), lambda g: (g * out * (1.0 - out),))


def relu(a):
    av = value_of(a)
    if not is_var(a):
        return np.maximum(av, 0.0)
    mask = av > 0
    return _node(av * mask, (a,), lambda g: (g * mask,))


def absolute(a):
    av = value_of(a)
    if not is_var(a):
        return np.abs(av)
    sign = np.sign(av)
    return _node(np.abs(av), (a,), lambda g: (g * sign,))


def maximum(a, b):
    av, bv = value_of(a), value_of(b)
    if not is_var(a, b):
        return np.maximum(av, bv)
    mask = av >= bv
    return _node(
        np.maximum(av, bv),
        (a, b),
        lambda g: (_unbroadcast(g * mask, av.shape), _unbroadcast(g * ~mask, bv.shape)),
    )


def minimum(a, b):
    av, bv = value_of(a), value_of(b)
    if not is_var(a, b):
        return np.minimum(av, bv)
    mask = av <= bv
    return _node(
        np.minimum(av, bv),
        (a, b),
        lambda g: (_unbroadcast(g * mask, av.shape), _unbroadcast(g * ~mask, bv.shape)),
    )


def softmax_rows(a):
    av = value_of(a)
    if not is_var(a):
        return tensorops.softmax_rows(av)
    tensorops.charge_flops(4 * av.size)
    out = tensorops.softmax_rows(av)
    return _node(out, (a,), lambda g: ((g - (g * out).sum(axis=1, keepdims=True)) * out,))


def logsumexp_rows(a):
    """Stable log(sum(exp(row))) with shape (n, 1)."""
    av = value_of(a)
    m = av.max(axis=1, keepdims=True)
    out = np.log(np.exp(av - m).sum(axis=1, keepdims=True)) + m
    if not is_var(a):
        return out
    soft = tensorops.softmax_rows(av)
    return _node(out, (a,), lambda g: (g * soft,))


def layer_norm(x, gain, bias, eps: float = 1e-5):
    xv, gv, bv = value_of(x), value_of(gain), value_of(bias)
    if not is_var(x, gain, bias):
        return tensorops.layer_norm(xv, gv, bv, eps)
    tensorops.charge_flops(8 * xv.size)
    mu = xv.mean(axis=1, keepdims=True)
    var = xv.var(axis=1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (xv - mu) * inv

    def grads(g):
        gxhat = g * gv
        gx = inv * (
            gxhat
            - gxhat.mean(axis=1, keepdims=True)
            - xhat * (gxhat * xhat).mean(axis=1, keepdims=True)
        )
        return (gx, (g * xhat).sum(axis=0), g.sum(axis=0))

    return _node(xhat * gv + bv, (x, gain, bias), grads)
