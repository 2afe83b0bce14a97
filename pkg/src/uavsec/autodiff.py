"""Minimal reverse-mode automatic differentiation over dense float64 arrays.

The engine supports exactly the primitives needed by the beamforming
networks and the deployment agent: affine algebra, concatenation and
slicing, reductions, smooth scalar maps, PReLU, and clamping. Everything
runs in 64-bit precision on numpy arrays; graphs are recorded implicitly
through parent links and replayed in reverse topological order.
"""

from __future__ import annotations

import contextlib

import numpy as np


class GradientError(RuntimeError):
    """Raised when a backward pass is requested on an invalid root."""


_GRAD_ENABLED = [True]
_MADD_COUNTERS = []


@contextlib.contextmanager
def no_grad():
    """Disable graph recording inside the block (pure evaluation mode)."""
    _GRAD_ENABLED.append(False)
    try:
        yield
    finally:
        _GRAD_ENABLED.pop()


@contextlib.contextmanager
def count_madds():
    """Count elementwise multiply/add/compare work done inside the block."""
    counter = {"madds": 0}
    _MADD_COUNTERS.append(counter)
    try:
        yield counter
    finally:
        _MADD_COUNTERS.pop()


def _bump(n):
    if _MADD_COUNTERS:
        _MADD_COUNTERS[-1]["madds"] += int(n)


class Tensor:
    """A dense float64 array plus an optional gradient slot.

    Tensors created by operations keep references to their parents and a
    closure that routes the output gradient back to them; `backward()` on a
    scalar root accumulates gradients additively over fan-out.
    """

    __slots__ = ("data", "requires_grad", "grad", "op", "_parents", "_backward")

    def __init__(self, data, requires_grad=False):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = bool(requires_grad)
        self.grad = None
        self.op = "leaf"
        self._parents = ()
        self._backward = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def size(self):
        return self.data.size

    def item(self):
        return float(self.data.item())

    def __repr__(self):
        return f"Tensor(op={self.op}, shape={self.data.shape}, requires_grad={self.requires_grad})"

    def _accumulate(self, g):
        if self.grad is None:
            self.grad = np.array(g, dtype=np.float64)
        else:
            self.grad += g

    def zero_grad(self):
        self.grad = None

    def backward(self):
        backward(self)

    # operator sugar; everything routes through the module-level primitives
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

    def __matmul__(self, other):
        return matmul(self, other)

    def __neg__(self):
        return scalar_mul(self, -1.0)

    def sum(self, axis=None, keepdims=False):
        return reduce_sum(self, axis=axis, keepdims=keepdims)


def tensor(data, requires_grad=False):
    return data if isinstance(data, Tensor) else Tensor(data, requires_grad)


def param(data):
    """Wrap an array as a trainable leaf."""
    return Tensor(data, requires_grad=True)


def _as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def _node(data, parents, backward_fn, op):
    out = Tensor(data)
    if _GRAD_ENABLED[-1] and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out.op = op
        out._parents = tuple(parents)
        out._backward = backward_fn
    return out


def _unbroadcast(g, shape):
    """Sum a gradient over broadcast dimensions back to `shape`."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


def add(x, y):
    x, y = _as_tensor(x), _as_tensor(y)
    out = x.data + y.data

    def back(g):
        if x.requires_grad:
            x._accumulate(_unbroadcast(g, x.data.shape))
        if y.requires_grad:
            y._accumulate(_unbroadcast(g, y.data.shape))

    _bump(out.size)
    return _node(out, (x, y), back, "add")


def sub(x, y):
    x, y = _as_tensor(x), _as_tensor(y)
    out = x.data - y.data

    def back(g):
        if x.requires_grad:
            x._accumulate(_unbroadcast(g, x.data.shape))
        if y.requires_grad:
            y._accumulate(_unbroadcast(-g, y.data.shape))

    _bump(out.size)
    return _node(out, (x, y), back, "sub")


def mul(x, y):
    """Elementwise product with numpy broadcasting."""
    x, y = _as_tensor(x), _as_tensor(y)
    out = x.data * y.data

    def back(g):
        if x.requires_grad:
            x._accumulate(_unbroadcast(g * y.data, x.data.shape))
        if y.requires_grad:
            y._accumulate(_unbroadcast(g * x.data, y.data.shape))

    _bump(out.size)
    return _node(out, (x, y), back, "mul")


def scalar_mul(x, c):
    x = _as_tensor(x)
    c = float(c)
    out = x.data * c

    def back(g):
        if x.requires_grad:
            x._accumulate(g * c)

    _bump(out.size)
    return _node(out, (x,), back, "scalar_mul")


def matmul(x, y):
    """Matrix product; operands must be at least 2-D, leading dims broadcast."""
    x, y = _as_tensor(x), _as_tensor(y)
    if x.data.ndim < 2 or y.data.ndim < 2:
        raise ValueError("matmul operands must be at least 2-D")
    if x.data.shape[-1] != y.data.shape[-2]:
        raise ValueError(f"matmul shape mismatch: {x.data.shape} @ {y.data.shape}")
    out = np.matmul(x.data, y.data)

    def back(g):
        if x.requires_grad:
            gx = np.matmul(g, np.swapaxes(y.data, -1, -2))
            x._accumulate(_unbroadcast(gx, x.data.shape))
        if y.requires_grad:
            gy = np.matmul(np.swapaxes(x.data, -1, -2), g)
            y._accumulate(_unbroadcast(gy, y.data.shape))

    _bump(out.size * x.data.shape[-1])
    return _node(out, (x, y), back, "matmul")


def concat(tensors, axis=-1):
    ts = [_as_tensor(t) for t in tensors]
    out = np.concatenate([t.data for t in ts], axis=axis)
    sizes = [t.data.shape[axis] for t in ts]
    offsets = np.cumsum([0] + sizes)

    def back(g):
        for t, lo, hi in zip(ts, offsets[:-1], offsets[1:]):
            if t.requires_grad:
                idx = [slice(None)] * g.ndim
                idx[axis] = slice(lo, hi)
                t._accumulate(g[tuple(idx)])

    return _node(out, ts, back, "concat")


def slice_axis(x, axis, start, stop):
    """Contiguous slice [start:stop) along one axis."""
    x = _as_tensor(x)
    idx = [slice(None)] * x.data.ndim
    idx[axis] = slice(start, stop)
    idx = tuple(idx)
    out = x.data[idx]

    def back(g):
        if x.requires_grad:
            full = np.zeros_like(x.data)
            full[idx] = g
            x._accumulate(full)

    return _node(out, (x,), back, "slice")


def reshape(x, shape):
    """Gradient-transparent view with a new shape (same element count)."""
    x = _as_tensor(x)
    out = x.data.reshape(shape)

    def back(g):
        if x.requires_grad:
            x._accumulate(g.reshape(x.data.shape))

    return _node(out, (x,), back, "reshape")


def reduce_sum(x, axis=None, keepdims=False):
    x = _as_tensor(x)
    out = x.data.sum(axis=axis, keepdims=keepdims)

    def back(g):
        if x.requires_grad:
            gg = g
            if not keepdims and axis is not None:
                gg = np.expand_dims(gg, axis)
            x._accumulate(np.broadcast_to(gg, x.data.shape).copy())

    _bump(x.size)
    return _node(np.asarray(out), (x,), back, "reduce_sum")


def reduce_max_over_set(tensors):
    """Elementwise max over same-shaped tensors; ties route the gradient to
    the lowest set index."""
    ts = [_as_tensor(t) for t in tensors]
    if len(ts) == 0:
        raise ValueError("reduce_max_over_set needs at least one tensor")
    shape = ts[0].data.shape
    for t in ts:
        if t.data.shape != shape:
            raise ValueError("reduce_max_over_set shape mismatch")
    stacked = np.stack([t.data for t in ts], axis=0)
    winner = stacked.argmax(axis=0)  # argmax picks the first (lowest-index) max
    out = np.take_along_axis(stacked, winner[None], axis=0)[0]

    def back(g):
        for i, t in enumerate(ts):
            if t.requires_grad:
                t._accumulate(g * (winner == i))

    _bump(out.size * len(ts))
    return _node(out, ts, back, "reduce_max_over_set")


def square(x):
    x = _as_tensor(x)
    out = x.data * x.data

    def back(g):
        if x.requires_grad:
            x._accumulate(g * 2.0 * x.data)

    _bump(out.size)
    return _node(out, (x,), back, "square")


def sqrt(x):
    x = _as_tensor(x)
    if np.any(x.data <= 0.0):
        raise ValueError("sqrt requires strictly positive arguments")
    out = np.sqrt(x.data)

    def back(g):
        if x.requires_grad:
            x._accumulate(g * 0.5 / out)

    return _node(out, (x,), back, "sqrt")


def log(x):
    x = _as_tensor(x)
    if np.any(x.data <= 0.0):
        raise ValueError("log requires strictly positive arguments")
    out = np.log(x.data)

    def back(g):
        if x.requires_grad:
            x._accumulate(g / x.data)

    return _node(out, (x,), back, "log")


def exp(x):
    x = _as_tensor(x)
    out = np.exp(x.data)

    def back(g):
        if x.requires_grad:
            x._accumulate(g * out)

    return _node(out, (x,), back, "exp")


def tanh(x):
    x = _as_tensor(x)
    out = np.tanh(x.data)

    def back(g):
        if x.requires_grad:
            x._accumulate(g * (1.0 - out * out))

    return _node(out, (x,), back, "tanh")


def prelu(x, slope):
    """x for x >= 0, slope*x for x < 0; slope is a learnable scalar."""
    x, slope = _as_tensor(x), _as_tensor(slope)
    if slope.data.size != 1:
        raise ValueError("prelu slope must be a scalar tensor")
    s = float(slope.data)
    neg = x.data < 0.0
    out = np.where(neg, s * x.data, x.data)

    def back(g):
        if x.requires_grad:
            x._accumulate(g * np.where(neg, s, 1.0))
        if slope.requires_grad:
            slope._accumulate(np.sum(g * np.where(neg, x.data, 0.0)).reshape(slope.data.shape))

    _bump(out.size)
    return _node(out, (x, slope), back, "prelu")


def clamp_min(x, lo):
    """max(x, lo) elementwise; zero gradient at and below the clamp point."""
    x = _as_tensor(x)
    lo = float(lo)
    out = np.maximum(x.data, lo)
    mask = x.data > lo

    def back(g):
        if x.requires_grad:
            x._accumulate(g * mask)

    _bump(out.size)
    return _node(out, (x,), back, "clamp_min")


def backward(root):
    """Reverse pass from a scalar root; gradients accumulate in `.grad`."""
    if root.data.size != 1:
        raise GradientError("backward root must be a scalar tensor")
    topo = []
    visited = set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            topo.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if id(p) not in visited:
                stack.append((p, False))
    root._accumulate(np.ones_like(root.data))
    for node in reversed(topo):
        if node._backward is not None:
            node._backward(node.grad)


def gradients(root, params):
    """Convenience: backward from `root`, then collect grads for `params`."""
    backward(root)
    return [np.zeros_like(p.data) if p.grad is None else p.grad for p in params]


def sgd_step(params, grads, lr):
    """Plain gradient step p <- p - lr * g, elementwise."""
    for p, g in zip(params, grads):
        g = np.asarray(g, dtype=np.float64)
        if g.shape != p.data.shape:
            raise ValueError(f"sgd_step shape mismatch: {g.shape} vs {p.data.shape}")
        p.data -= lr * g


class Sgd:
    """SGD over a fixed parameter list, optional classical momentum and
    global gradient-norm clipping."""

    def __init__(self, params, lr, momentum=0.0, clip_norm=None):
        self.params = list(params)
        self.lr = float(lr)
        self.momentum = float(momentum)
        self.clip_norm = clip_norm
        self._velocity = [np.zeros_like(p.data) for p in self.params]

    def zero_grad(self):
        for p in self.params:
            p.grad = None

    def step(self):
        scale = 1.0
        if self.clip_norm is not None:
            total = np.sqrt(
                sum(float(np.sum(p.grad * p.grad)) for p in self.params if p.grad is not None)
            )
            if total > self.clip_norm:
                scale = self.clip_norm / total
        for p, v in zip(self.params, self._velocity):
            if p.grad is None:
                continue
            if self.momentum:
                v *= self.momentum
                v += scale * p.grad
                p.data -= self.lr * v
            else:
                p.data -= self.lr * scale * p.grad


def glorot_uniform(rng, fan_in, fan_out):
    """Symmetric uniform init on [-a, a], a = sqrt(6 / (fan_in + fan_out))."""
    a = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-a, a, size=(fan_in, fan_out))


def assert_finite(x, what="tensor"):
    data = x.data if isinstance(x, Tensor) else np.asarray(x)
    if not np.all(np.isfinite(data)):
        raise FloatingPointError(f"non-finite values in {what}")
