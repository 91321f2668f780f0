"""Reverse-mode autodiff over dense numpy arrays.

A Tensor wraps an ndarray (float32 by default, float64 for verification)
and records a backward closure per produced node. Calling .backward() on a
scalar walks the graph in reverse topological order and accumulates
gradients into every node that requires them.
"""

from __future__ import annotations

import numpy as np

DEFAULT_DTYPE = np.float32


class DimensionError(ValueError):
    """Shape/axis mismatch between operands."""


class ConfigurationError(ValueError):
    """Invalid option value (unknown activation kind, bad strategy, ...)."""


def _coerce(data, dtype):
    arr = np.asarray(data)
    if dtype is not None:
        arr = arr.astype(dtype, copy=False)
    elif arr.dtype not in (np.float32, np.float64):
        arr = arr.astype(DEFAULT_DTYPE)
    return arr


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum a broadcast gradient back down to `shape`."""
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, (gs, ss) in enumerate(zip(g.shape, shape)) if ss == 1 and gs != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False, dtype=None):
        arr = _coerce(data, dtype)
        if not np.all(np.isfinite(arr)):
            raise ValueError("tensor constructed from non-finite values")
        self.data = arr
        self.grad = None
        self.requires_grad = requires_grad
        self._parents = ()
        self._backward = None

    @classmethod
    def _make(cls, data: np.ndarray, parents=(), backward=None) -> "Tensor":
        """Internal fast path: no finiteness check, optional graph edges."""
        t = cls.__new__(cls)
        t.data = data
        t.grad = None
        t._parents = ()
        t._backward = None
        t.requires_grad = any(p.requires_grad for p in parents)
        if t.requires_grad:
            t._parents = tuple(parents)
            t._backward = backward
        return t

    # ---- introspection ----

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def size(self):
        return self.data.size

    def item(self) -> float:
        return float(self.data.reshape(-1)[0])

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, dtype={self.data.dtype}, requires_grad={self.requires_grad})"

    def detach(self) -> "Tensor":
        return Tensor._make(self.data)

    def copy(self) -> "Tensor":
        return Tensor._make(self.data.copy())

    # ---- autodiff machinery ----

    def accumulate_grad(self, g: np.ndarray):
        # accumulation allocates rather than mutating: gradients may alias
        # arrays shared between sibling branches
        if self.grad is None:
            self.grad = g
        else:
            self.grad = self.grad + g

    def backward(self, grad: np.ndarray | None = None):
        if grad is None:
            if self.data.size != 1:
                raise ValueError("backward() without an explicit gradient requires a scalar")
            grad = np.ones_like(self.data)
        # reverse topological order via iterative post-order DFS
        topo = []
        seen = set()
        stack = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                topo.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if p.requires_grad and id(p) not in seen:
                    stack.append((p, False))
        self.accumulate_grad(np.asarray(grad, dtype=self.data.dtype))
        for node in reversed(topo):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    def zero_grad(self):
        self.grad = None

    # ---- elementwise arithmetic (full numpy broadcasting) ----

    def _wrap(self, other) -> "Tensor":
        if isinstance(other, Tensor):
            return other
        return Tensor._make(np.asarray(other, dtype=self.data.dtype))

    def __add__(self, other):
        other = self._wrap(other)
        a, b = self, other

        def bw(g):
            if a.requires_grad:
                a.accumulate_grad(_unbroadcast(g, a.data.shape))
            if b.requires_grad:
                b.accumulate_grad(_unbroadcast(g, b.data.shape))

        return Tensor._make(a.data + b.data, (a, b), bw)

    __radd__ = __add__

    def __sub__(self, other):
        other = self._wrap(other)
        a, b = self, other

        def bw(g):
            if a.requires_grad:
                a.accumulate_grad(_unbroadcast(g, a.data.shape))
            if b.requires_grad:
                b.accumulate_grad(_unbroadcast(-g, b.data.shape))

        return Tensor._make(a.data - b.data, (a, b), bw)

    def __rsub__(self, other):
        return self._wrap(other).__sub__(self)

    def __neg__(self):
        a = self

        def bw(g):
            a.accumulate_grad(-g)

        return Tensor._make(-a.data, (a,), bw)

    def __mul__(self, other):
        other = self._wrap(other)
        a, b = self, other

        def bw(g):
            if a.requires_grad:
                a.accumulate_grad(_unbroadcast(g * b.data, a.data.shape))
            if b.requires_grad:
                b.accumulate_grad(_unbroadcast(g * a.data, b.data.shape))

        return Tensor._make(a.data * b.data, (a, b), bw)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Tensor):
            raise TypeError("tensor/tensor division not supported; multiply by a reciprocal")
        return self * (1.0 / float(other))

    def square(self):
        a = self

        def bw(g):
            a.accumulate_grad(g * (2.0 * a.data))

        return Tensor._make(np.square(a.data), (a,), bw)

    def log(self):
        a = self

        def bw(g):
            a.accumulate_grad(g / a.data)

        return Tensor._make(np.log(a.data), (a,), bw)

    def clamp(self, lo: float, hi: float):
        a = self
        out = np.clip(a.data, lo, hi)
        mask = (a.data >= lo) & (a.data <= hi)

        def bw(g):
            a.accumulate_grad(g * mask)

        return Tensor._make(out, (a,), bw)

    def tanh(self):
        a = self
        out = np.tanh(a.data)

        def bw(g):
            a.accumulate_grad(g * (1.0 - out * out))

        return Tensor._make(out, (a,), bw)

    def sigmoid(self):
        a = self
        out = np.empty_like(a.data)
        pos = a.data >= 0
        out[pos] = 1.0 / (1.0 + np.exp(-a.data[pos]))
        ex = np.exp(a.data[~pos])
        out[~pos] = ex / (1.0 + ex)

        def bw(g):
            a.accumulate_grad(g * out * (1.0 - out))

        return Tensor._make(out, (a,), bw)

    # ---- reductions / reshaping ----

    def sum(self):
        a = self

        def bw(g):
            a.accumulate_grad(np.broadcast_to(g, a.data.shape).astype(a.data.dtype))

        return Tensor._make(np.asarray(a.data.sum(), dtype=a.data.dtype), (a,), bw)

    def mean(self):
        a = self
        n = a.data.size

        def bw(g):
            a.accumulate_grad(np.broadcast_to(g / n, a.data.shape).astype(a.data.dtype))

        return Tensor._make(np.asarray(a.data.mean(), dtype=a.data.dtype), (a,), bw)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        a = self
        orig = a.data.shape

        def bw(g):
            a.accumulate_grad(g.reshape(orig))

        return Tensor._make(a.data.reshape(shape), (a,), bw)
