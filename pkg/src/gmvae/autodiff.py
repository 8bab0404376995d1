"""A small reverse-mode differentiation engine over numpy arrays.

``Tensor`` wraps a float64 array and records the operation that produced
it.  ``Tensor.backward()`` on a scalar walks the graph once in reverse
topological order and accumulates ``.grad`` on every tensor created with
``requires_grad=True``.

The module-level functions (``exp``, ``log``, ``lgamma``, ...) accept either
tensors or plain arrays.  On arrays they return arrays, so numerical code
written against them runs unchanged with or without a graph.
"""

from __future__ import annotations

import contextlib

import numpy as np

from . import kernels

_GRAD_ENABLED = True


@contextlib.contextmanager
def no_grad():
    """Evaluate tensor code without recording a graph."""
    global _GRAD_ENABLED
    previous = _GRAD_ENABLED
    _GRAD_ENABLED = False
    try:
        yield
    finally:
        _GRAD_ENABLED = previous


def _unbroadcast(grad, shape):
    if grad.shape == shape:
        return grad
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad.reshape(shape)


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "name")
    __array_priority__ = 100

    def __init__(self, data, requires_grad=False, name=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self._parents = ()
        self._backward = None
        self.name = name

    def __repr__(self):
        tag = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}{tag}, requires_grad={self.requires_grad})"

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    def numpy(self):
        return self.data

    def item(self):
        return float(self.data)

    def zero_grad(self):
        self.grad = None

    # -- graph construction -------------------------------------------------

    @staticmethod
    def _make(data, parents, backward):
        out = Tensor(data)
        if _GRAD_ENABLED and any(p.requires_grad for p in parents):
            out.requires_grad = True
            out._parents = parents
            out._backward = backward
        return out

    def backward(self):
        if self.data.size != 1:
            raise ValueError(f"backward() needs a scalar root, got shape {self.shape}")
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
                if parent.requires_grad and id(parent) not in seen:
                    stack.append((parent, False))
        self.grad = np.ones_like(self.data)
        for node in reversed(order):
            if node._backward is None or node.grad is None:
                continue
            for parent, g in zip(node._parents, node._backward(node.grad)):
                if g is None or not parent.requires_grad:
                    continue
                g = _unbroadcast(np.asarray(g, dtype=np.float64), parent.shape)
                parent.grad = g if parent.grad is None else parent.grad + g

    # -- arithmetic ---------------------------------------------------------

    def __add__(self, other):
        other = as_tensor(other)
        return Tensor._make(self.data + other.data, (self, other), lambda g: (g, g))

    __radd__ = __add__

    def __sub__(self, other):
        other = as_tensor(other)
        return Tensor._make(self.data - other.data, (self, other), lambda g: (g, -g))

    def __rsub__(self, other):
        return as_tensor(other) - self

    def __mul__(self, other):
        other = as_tensor(other)
        a, b = self.data, other.data
        return Tensor._make(a * b, (self, other), lambda g: (g * b, g * a))

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = as_tensor(other)
        a, b = self.data, other.data
        out = a / b
        return Tensor._make(out, (self, other), lambda g: (g / b, -g * out / b))

    def __rtruediv__(self, other):
        return as_tensor(other) / self

    def __neg__(self):
        return Tensor._make(-self.data, (self,), lambda g: (-g,))

    def __pow__(self, power):
        if isinstance(power, Tensor):
            raise TypeError("only constant exponents are supported")
        p = float(power)
        a = self.data
        return Tensor._make(a ** p, (self,), lambda g: (g * p * a ** (p - 1.0),))

    def __matmul__(self, other):
        other = as_tensor(other)
        a, b = self.data, other.data
        if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
            raise ValueError(f"matmul shape mismatch: {a.shape} @ {b.shape}")
        return Tensor._make(a @ b, (self, other), lambda g: (g @ b.T, a.T @ g))

    def __getitem__(self, index):
        shape = self.shape

        def backward(g):
            full = np.zeros(shape)
            np.add.at(full, index, g)
            return (full,)

        return Tensor._make(self.data[index], (self,), backward)

    def sum(self, axis=None, keepdims=False):
        shape = self.shape

        def backward(g):
            if axis is not None and not keepdims:
                g = np.expand_dims(g, axis)
            return (np.broadcast_to(g, shape),)

        return Tensor._make(self.data.sum(axis=axis, keepdims=keepdims), (self,), backward)

    def mean(self, axis=None):
        count = self.data.size if axis is None else self.data.shape[axis]
        return self.sum(axis=axis) / float(count)

    def reshape(self, *shape):
        old = self.shape
        return Tensor._make(self.data.reshape(*shape), (self,), lambda g: (g.reshape(old),))


def as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def _unary(x, forward, derivative):
    """Apply ``forward`` elementwise; ``derivative(a, out)`` gives d out / d a."""
    if not isinstance(x, Tensor):
        return forward(np.asarray(x, dtype=np.float64))
    a = x.data
    out = forward(a)
    return Tensor._make(out, (x,), lambda g: (g * derivative(a, out),))


def concat(tensors, axis=-1):
    tensors = [as_tensor(t) for t in tensors]
    sizes = [t.shape[axis] for t in tensors]
    bounds = np.cumsum(sizes)[:-1]

    def backward(g):
        return tuple(np.split(g, bounds, axis=axis))

    return Tensor._make(np.concatenate([t.data for t in tensors], axis=axis), tuple(tensors), backward)


def stack_columns(columns):
    """Join equally shaped tensors along a new last axis."""
    return concat([c.reshape(*c.shape, 1) if isinstance(c, Tensor) else as_tensor(c)[..., None]
                   for c in columns], axis=-1)


# -- elementwise functions -----------------------------------------------------

def exp(x):
    return _unary(x, np.exp, lambda a, out: out)


def expm1(x):
    return _unary(x, np.expm1, lambda a, out: out + 1.0)


def log(x):
    return _unary(x, np.log, lambda a, out: 1.0 / a)


def log1p(x):
    return _unary(x, np.log1p, lambda a, out: 1.0 / (1.0 + a))


def sqrt(x):
    return _unary(x, np.sqrt, lambda a, out: 0.5 / out)


def square(x):
    return _unary(x, np.square, lambda a, out: 2.0 * a)


def tanh(x):
    return _unary(x, np.tanh, lambda a, out: 1.0 - out * out)


def _sigmoid(a):
    e = np.exp(-np.abs(a))
    return np.where(a >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def sigmoid(x):
    return _unary(x, _sigmoid, lambda a, out: out * (1.0 - out))


def _softplus(a):
    return np.maximum(a, 0.0) + np.log1p(np.exp(-np.abs(a)))


def softplus(x):
    return _unary(x, _softplus, lambda a, out: _sigmoid(a))


def lgamma(x):
    return _unary(x, kernels.lgamma, lambda a, out: kernels.digamma(a))


def digamma(x):
    return _unary(x, kernels.digamma, lambda a, out: kernels.trigamma(a))


def clip(x, lo, hi):
    """Clamp to [lo, hi]; the gradient is zero where the clamp is active."""
    return _unary(x, lambda a: np.clip(a, lo, hi), lambda a, out: ((a >= lo) & (a <= hi)).astype(np.float64))


def bernoulli_log_likelihood(logits, targets):
    """Sum over the last axis of ``t * l - softplus(l)``; never forms probabilities."""
    t = targets.data if isinstance(targets, Tensor) else np.asarray(targets, dtype=np.float64)
    if isinstance(logits, Tensor):
        if logits.shape != t.shape:
            raise ValueError(f"logits {logits.shape} and targets {t.shape} differ in shape")
        l = logits.data
        out = np.sum(t * l - _softplus(l), axis=-1)

        def backward(g):
            return (g[..., None] * (t - _sigmoid(l)),)

        return Tensor._make(out, (logits,), backward)
    l = np.asarray(logits, dtype=np.float64)
    return np.sum(t * l - _softplus(l), axis=-1)


def implicit_gamma(shape, draws):
    """Attach implicit-reparameterization gradients to Gamma(shape, 1) draws.

    The forward value is ``draws`` unchanged; the backward pass multiplies
    by dX/da from :func:`gmvae.kernels.gamma_shape_grad`.
    """
    x = np.asarray(draws, dtype=np.float64)
    if not isinstance(shape, Tensor):
        return x
    a = shape.data
    return Tensor._make(x.copy(), (shape,), lambda g: (g * kernels.gamma_shape_grad(a, x),))


def value(x):
    """Underlying array of a tensor (or the array itself)."""
    return x.data if isinstance(x, Tensor) else np.asarray(x, dtype=np.float64)
