"""Reverse-mode autodiff over numpy buffers.

A Tensor wraps a float64 ndarray plus an optional graph node (parent list and
a backward closure).  Forward ops record just enough to push gradients back;
`backward(loss)` walks the recorded graph once in reverse topological order.
Everything is single-threaded and deterministic for fixed inputs.
"""

from __future__ import annotations

import contextlib

import numpy as np

DTYPE = np.float64


class DimensionError(ValueError):
    """Shape/axis mismatch; message names the offending axes."""


_grad_enabled = True


@contextlib.contextmanager
def no_grad():
    """Disable graph recording inside the block (forward-only evaluation)."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


def grad_enabled():
    return _grad_enabled


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_backward", "_parents")

    def __init__(self, data, requires_grad=False):
        self.data = np.asarray(data, dtype=DTYPE)
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self._backward = None
        self._parents = ()

    # -- basic introspection -------------------------------------------------

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    def item(self):
        return float(self.data.reshape(()))

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    def detach(self):
        """Same buffer, no graph membership."""
        return Tensor(self.data)

    def zero_grad(self):
        self.grad = None

    def accumulate_grad(self, g):
        if self.grad is None:
            self.grad = np.array(g, dtype=DTYPE, copy=True)
        else:
            self.grad += g

    # -- arithmetic ------------------------------------------------------

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return mul(self, -1.0)

    def __sub__(self, other):
        return add(self, mul(_as_tensor(other), -1.0))

    def __rsub__(self, other):
        return add(_as_tensor(other), mul(self, -1.0))

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(_as_tensor(other), self)

    def __pow__(self, p):
        return power(self, p)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, key):
        return getitem(self, key)

    # -- reductions / shape ------------------------------------------------

    def sum(self, axis=None, keepdims=False):
        return tsum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims=False):
        return tmean(self, axis=axis, keepdims=keepdims)

    def reshape(self, *shape):
        return reshape(self, *shape)

    def transpose(self, *axes):
        return transpose(self, *axes)


def _as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def _from_op(data, parents, backward):
    """Build the output tensor of an op, wiring the graph if tracking is on."""
    out = Tensor(data)
    if _grad_enabled and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward
    return out


def _unbroadcast(g, shape):
    """Reduce a broadcast gradient back to `shape`."""
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, (gs, ss) in enumerate(zip(g.shape, shape)) if ss == 1 and gs != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


# -- elementwise ops -----------------------------------------------------


def add(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    out_data = a.data + b.data

    def bwd(g):
        if a.requires_grad:
            a.accumulate_grad(_unbroadcast(g, a.data.shape))
        if b.requires_grad:
            b.accumulate_grad(_unbroadcast(g, b.data.shape))

    return _from_op(out_data, (a, b), bwd)


def mul(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    out_data = a.data * b.data

    def bwd(g):
        if a.requires_grad:
            a.accumulate_grad(_unbroadcast(g * b.data, a.data.shape))
        if b.requires_grad:
            b.accumulate_grad(_unbroadcast(g * a.data, b.data.shape))

    return _from_op(out_data, (a, b), bwd)


def div(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    out_data = a.data / b.data

    def bwd(g):
        if a.requires_grad:
            a.accumulate_grad(_unbroadcast(g / b.data, a.data.shape))
        if b.requires_grad:
            b.accumulate_grad(_unbroadcast(-g * a.data / (b.data * b.data), b.data.shape))

    return _from_op(out_data, (a, b), bwd)


def power(a, p):
    a = _as_tensor(a)
    p = float(p)
    out_data = a.data ** p

    def bwd(g):
        if a.requires_grad:
            a.accumulate_grad(g * p * a.data ** (p - 1.0))

    return _from_op(out_data, (a,), bwd)


def exp(a):
    a = _as_tensor(a)
    out_data = np.exp(a.data)

    def bwd(g):
        if a.requires_grad:
            a.accumulate_grad(g * out_data)

    return _from_op(out_data, (a,), bwd)


def log(a):
    a = _as_tensor(a)
    out_data = np.log(a.data)

    def bwd(g):
        if a.requires_grad:
            a.accumulate_grad(g / a.data)

    return _from_op(out_data, (a,), bwd)


def sqrt(a):
    a = _as_tensor(a)
    out_data = np.sqrt(a.data)

    def bwd(g):
        if a.requires_grad:
            a.accumulate_grad(g * 0.5 / out_data)

    return _from_op(out_data, (a,), bwd)


def absolute(a):
    a = _as_tensor(a)
    out_data = np.abs(a.data)

    def bwd(g):
        if a.requires_grad:
            a.accumulate_grad(g * np.sign(a.data))

    return _from_op(out_data, (a,), bwd)


def tanh(a):
    a = _as_tensor(a)
    out_data = np.tanh(a.data)

    def bwd(g):
        if a.requires_grad:
            a.accumulate_grad(g * (1.0 - out_data * out_data))

    return _from_op(out_data, (a,), bwd)


def maximum_const(a, c):
    """Elementwise max(a, c) against a constant; subgradient 0 at the tie."""
    a = _as_tensor(a)
    out_data = np.maximum(a.data, c)
    mask = (a.data > c).astype(DTYPE)

    def bwd(g):
        if a.requires_grad:
            a.accumulate_grad(g * mask)

    return _from_op(out_data, (a,), bwd)


# -- reductions -------------------------------------------------


def tsum(a, axis=None, keepdims=False):
    a = _as_tensor(a)
    out_data = a.data.sum(axis=axis, keepdims=keepdims)

    def bwd(g):
        if a.requires_grad:
            gg = g
            if axis is not None and not keepdims:
                gg = np.expand_dims(gg, axis)
            a.accumulate_grad(np.broadcast_to(gg, a.data.shape).copy())

    return _from_op(out_data, (a,), bwd)


def tmean(a, axis=None, keepdims=False):
    a = _as_tensor(a)
    out_data = a.data.mean(axis=axis, keepdims=keepdims)
    if axis is None:
        count = a.data.size
    else:
        ax = axis if isinstance(axis, tuple) else (axis,)
        count = 1
        for i in ax:
            count *= a.data.shape[i]

    def bwd(g):
        if a.requires_grad:
            gg = g
            if axis is not None and not keepdims:
                gg = np.expand_dims(gg, axis)
            a.accumulate_grad(np.broadcast_to(gg, a.data.shape) / count)

    return _from_op(out_data, (a,), bwd)


# -- linear algebra ------------------------------------------------------


def matmul(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    if a.data.shape[-1] != b.data.shape[-2]:
        raise DimensionError(
            f"matmul inner axes disagree: a{a.data.shape} (axis {a.ndim - 1}) vs b{b.data.shape} (axis {b.ndim - 2})"
        )
    out_data = a.data @ b.data

    def bwd(g):
        if a.requires_grad:
            ga = g @ np.swapaxes(b.data, -1, -2)
            a.accumulate_grad(_unbroadcast(ga, a.data.shape))
        if b.requires_grad:
            gb = np.swapaxes(a.data, -1, -2) @ g
            b.accumulate_grad(_unbroadcast(gb, b.data.shape))

    return _from_op(out_data, (a, b), bwd)


# -- shape ops -----------------------------------------------------------


def reshape(a, *shape):
    a = _as_tensor(a)
    if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
        shape = tuple(shape[0])
    out_data = a.data.reshape(shape)
    in_shape = a.data.shape

    def bwd(g):
        if a.requires_grad:
            a.accumulate_grad(g.reshape(in_shape))

    return _from_op(out_data, (a,), bwd)


def transpose(a, *axes):
    a = _as_tensor(a)
    if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
        axes = tuple(axes[0])
    if not axes:
        axes = tuple(reversed(range(a.ndim)))
    out_data = a.data.transpose(axes)
    inv = np.argsort(axes)

    def bwd(g):
        if a.requires_grad:
            a.accumulate_grad(g.transpose(inv))

    return _from_op(out_data, (a,), bwd)


def concat(parts, axis=0):
    parts = [_as_tensor(p) for p in parts]
    out_data = np.concatenate([p.data for p in parts], axis=axis)
    sizes = [p.data.shape[axis] for p in parts]
    splits = np.cumsum(sizes)[:-1]

    def bwd(g):
        gs = np.split(g, splits, axis=axis)
        for p, gp in zip(parts, gs):
            if p.requires_grad:
                p.accumulate_grad(gp)

    return _from_op(out_data, tuple(parts), bwd)


def pad(a, pad_width):
    """Constant zero padding; pad_width in np.pad format."""
    a = _as_tensor(a)
    out_data = np.pad(a.data, pad_width)
    slices = tuple(slice(lo, lo + n) for (lo, _), n in zip(pad_width, a.data.shape))

    def bwd(g):
        if a.requires_grad:
            a.accumulate_grad(g[slices])

    return _from_op(out_data, (a,), bwd)


def getitem(a, key):
    a = _as_tensor(a)
    if isinstance(key, np.ndarray) or (
        isinstance(key, tuple) and any(isinstance(k, np.ndarray) for k in key)
    ):
        raise TypeError("use take()/gather_rows() for integer-array indexing")
    out_data = a.data[key]

    def bwd(g):
        if a.requires_grad:
            z = np.zeros_like(a.data)
            z[key] += g
            a.accumulate_grad(z)

    return _from_op(out_data, (a,), bwd)


def take(a, indices, axis=0):
    """Gather along `axis` with an integer index array (duplicates allowed)."""
    a = _as_tensor(a)
    indices = np.asarray(indices)
    if axis != 0:
        raise NotImplementedError("take() is only needed along axis 0")
    out_data = a.data[indices]

    def bwd(g):
        if a.requires_grad:
            z = np.zeros_like(a.data)
            np.add.at(z, indices, g)
            a.accumulate_grad(z)

    return _from_op(out_data, (a,), bwd)


def gather_rows(a, idx):
    """out[i] = a[i, idx[i]] for a 2-d tensor; used to pick class scores."""
    a = _as_tensor(a)
    idx = np.asarray(idx)
    if a.ndim != 2:
        raise DimensionError(f"gather_rows expects 2-d input, got shape {a.data.shape}")
    rows = np.arange(a.data.shape[0])
    out_data = a.data[rows, idx]

    def bwd(g):
        if a.requires_grad:
            z = np.zeros_like(a.data)
            np.add.at(z, (rows, idx), g)
            a.accumulate_grad(z)

    return _from_op(out_data, (a,), bwd)


# -- backward pass -------------------------------------------------------


def backward(loss):
    """Populate grads of every requires_grad tensor reachable from `loss`.

    `loss` must be scalar.  Repeated calls accumulate unless grads are zeroed
    in between.
    """
    if not isinstance(loss, Tensor):
        raise TypeError("backward() expects a Tensor")
    if loss.data.size != 1:
        raise ValueError(f"backward() needs a scalar loss, got shape {loss.data.shape}")

    # iterative DFS so deep graphs do not hit the recursion limit
    topo = []
    visited = set()
    stack = [(loss, False)]
    while stack:
        node, processed = stack.pop()
        if processed:
            topo.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if id(p) not in visited and p.requires_grad:
                stack.append((p, False))

    # interior grads are per-call scratch; only leaves accumulate across calls
    for node in topo:
        if node._parents:
            node.grad = None

    loss.accumulate_grad(np.ones_like(loss.data))
    for node in reversed(topo):
        if node._backward is not None and node.grad is not None:
            node._backward(node.grad)
