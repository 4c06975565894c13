"""Minimal reverse-mode autodiff over numpy float64 arrays.

Just enough machinery for the ladder network's training objective: tracked
tensors, broadcasting elementwise arithmetic, dense layers, axis
reductions, and the handful of nonlinearities the model uses. Graphs are
built per loss evaluation and discarded after backward().
"""

from __future__ import annotations

import numpy as np


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum a gradient down to the shape the operand actually had."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


class Tensor:
    """A node in the computation graph: value, gradient, and backward rule."""

    __slots__ = ("data", "grad", "_parents", "_backward")

    def __init__(self, data, parents=(), backward=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self._parents = parents
        self._backward = backward

    @property
    def shape(self):
        return self.data.shape

    # -- graph traversal ----------------------------------------------------

    def backward(self):
        if self.data.size != 1:
            raise ValueError("backward() needs a scalar root")
        order = []
        seen = set()
        stack = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if id(parent) not in seen:
                    stack.append((parent, False))
        for node in order:
            node.grad = np.zeros_like(node.data)
        self.grad = np.ones_like(self.data)
        for node in reversed(order):
            if node._backward is not None:
                node._backward(node.grad)

    # -- operators ----------------------------------------------------------

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return mul(self, -1.0)


def as_tensor(value) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = Tensor(a.data + b.data, parents=(a, b))

    def backward(g):
        a.grad += _unbroadcast(g, a.data.shape)
        b.grad += _unbroadcast(g, b.data.shape)

    out._backward = backward
    return out


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = Tensor(a.data - b.data, parents=(a, b))

    def backward(g):
        a.grad += _unbroadcast(g, a.data.shape)
        b.grad -= _unbroadcast(g, b.data.shape)

    out._backward = backward
    return out


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = Tensor(a.data * b.data, parents=(a, b))

    def backward(g):
        a.grad += _unbroadcast(g * b.data, a.data.shape)
        b.grad += _unbroadcast(g * a.data, b.data.shape)

    out._backward = backward
    return out


def div(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = Tensor(a.data / b.data, parents=(a, b))

    def backward(g):
        a.grad += _unbroadcast(g / b.data, a.data.shape)
        b.grad += _unbroadcast(-g * a.data / (b.data * b.data), b.data.shape)

    out._backward = backward
    return out


def linear(x, w) -> Tensor:
    """Dense map: rows of x (n, d_in) times w (d_out, d_in) transposed."""
    x, w = as_tensor(x), as_tensor(w)
    out = Tensor(x.data @ w.data.T, parents=(x, w))

    def backward(g):
        x.grad += g @ w.data
        w.grad += g.T @ x.data

    out._backward = backward
    return out


def tsum(a, axis=None, keepdims=False) -> Tensor:
    a = as_tensor(a)
    out = Tensor(a.data.sum(axis=axis, keepdims=keepdims), parents=(a,))

    def backward(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        a.grad += np.broadcast_to(g, a.data.shape)

    out._backward = backward
    return out


def tmean(a, axis=None, keepdims=False) -> Tensor:
    a = as_tensor(a)
    count = a.data.size if axis is None else a.data.shape[axis]
    return mul(tsum(a, axis=axis, keepdims=keepdims), 1.0 / count)


def sqrt(a) -> Tensor:
    a = as_tensor(a)
    root = np.sqrt(a.data)
    out = Tensor(root, parents=(a,))

    def backward(g):
        a.grad += g * 0.5 / root

    out._backward = backward
    return out


def exp(a) -> Tensor:
    a = as_tensor(a)
    value = np.exp(a.data)
    out = Tensor(value, parents=(a,))

    def backward(g):
        a.grad += g * value

    out._backward = backward
    return out


def log(a) -> Tensor:
    a = as_tensor(a)
    out = Tensor(np.log(a.data), parents=(a,))

    def backward(g):
        a.grad += g / a.data

    out._backward = backward
    return out


def relu(a) -> Tensor:
    a = as_tensor(a)
    mask = a.data > 0.0
    out = Tensor(np.where(mask, a.data, 0.0), parents=(a,))

    def backward(g):
        a.grad += g * mask

    out._backward = backward
    return out


def sigmoid(a) -> Tensor:
    a = as_tensor(a)
    value = 1.0 / (1.0 + np.exp(-a.data))
    out = Tensor(value, parents=(a,))

    def backward(g):
        a.grad += g * value * (1.0 - value)

    out._backward = backward
    return out


def batch_normalize(z, epsilon: float) -> tuple[Tensor, Tensor, Tensor]:
    """Normalize rows by the batch's own per-column mean and variance.

    Returns (normalized, mean, variance); the statistics stay on the tape
    so gradients flow through them.
    """
    mean = tmean(z, axis=0)
    centered = sub(z, mean)
    variance = tmean(mul(centered, centered), axis=0)
    normalized = div(centered, sqrt(add(variance, epsilon)))
    return normalized, mean, variance


def log_softmax(logits) -> Tensor:
    """Row-wise log-softmax; the max shift is exact and kept off the tape."""
    logits = as_tensor(logits)
    shift = Tensor(logits.data.max(axis=1, keepdims=True))
    shifted = sub(logits, shift)
    lse = log(tsum(exp(shifted), axis=1, keepdims=True))
    return sub(shifted, lse)


def cross_entropy(logits, labels: np.ndarray) -> Tensor:
    """Mean negative log-likelihood of integer labels under the logits."""
    lsm = log_softmax(logits)
    onehot = np.zeros(lsm.data.shape)
    onehot[np.arange(labels.size), labels] = 1.0
    return mul(tsum(mul(lsm, Tensor(onehot))), -1.0 / labels.size)
