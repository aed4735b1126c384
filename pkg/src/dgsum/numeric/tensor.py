"""Reverse-mode autodiff over numpy arrays.

A ``Tensor`` records the operation that produced it (parents + a backward
closure); calling ``backward()`` on a scalar replays the recorded graph in
reverse topological order and accumulates gradients into every tensor with
``requires_grad``. Eager execution, no compilation: at desk scale the tape
overhead is irrelevant.

Precision is a process-global switch (``set_precision``): double for
gradient checking and deterministic reruns, single allowed for training.
"""

from __future__ import annotations

import itertools
from contextlib import contextmanager
from typing import Sequence

import numpy as np

from ..errors import NumericError, ShapeError

_DTYPE = np.float64
_GRAD_ENABLED = True
_SEQ = itertools.count()

MASK_FILL = -1e9  # additive mask value; exp() underflows to exactly 0.0


def set_precision(mode: str) -> None:
    """Switch the dtype used for all tensors created afterwards."""
    global _DTYPE
    if mode == "double":
        _DTYPE = np.float64
    elif mode == "single":
        _DTYPE = np.float32
    else:
        raise NumericError(f"unknown precision mode {mode!r} (use 'single' or 'double')")


def default_dtype():
    return _DTYPE


@contextmanager
def no_grad():
    """Disable tape recording inside the block (inference paths)."""
    global _GRAD_ENABLED
    prev = _GRAD_ENABLED
    _GRAD_ENABLED = False
    try:
        yield
    finally:
        _GRAD_ENABLED = prev


class Tensor:
    """n-d array plus gradient accumulator and recorded provenance."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "_seq")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=_DTYPE)
        self.grad = None
        self.requires_grad = bool(requires_grad) and _GRAD_ENABLED
        self._parents: tuple = ()
        self._backward = None
        self._seq = next(_SEQ)

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    def item(self) -> float:
        return float(self.data.reshape(-1)[0])

    def __repr__(self):
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    def zero_grad(self):
        self.grad = None

    def backward(self):
        """Reverse pass from a scalar; visits each recorded op exactly once."""
        if self.size != 1:
            raise ShapeError(f"backward: output must be scalar, got shape {self.shape}")
        if not np.all(np.isfinite(self.data)):
            raise NumericError("backward: loss is not finite")
        nodes = _reachable(self)
        _accum(self, np.ones_like(self.data))
        for node in sorted(nodes, key=lambda t: t._seq, reverse=True):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    # operator sugar ---------------------------------------------------
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __neg__(self):
        return mul(self, -1.0)

    def __truediv__(self, other):
        return div(self, other)

    def __matmul__(self, other):
        return matmul(self, other)

    def __pow__(self, p):
        return power(self, p)

    @property
    def T(self):
        return transpose(self)


Value = Tensor  # the differentiable-value carrier; Tensor is the working name


def _reachable(root: Tensor) -> list[Tensor]:
    out, seen, stack = [], set(), [root]
    while stack:
        t = stack.pop()
        if id(t) in seen:
            continue
        seen.add(id(t))
        out.append(t)
        stack.extend(t._parents)
    return out


def _accum(t: Tensor, g: np.ndarray) -> None:
    if not t.requires_grad:
        return
    if t.grad is None:
        t.grad = np.zeros_like(t.data)
    t.grad += g


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    """Reduce a broadcast gradient back to the operand's shape."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, (gs, ss) in enumerate(zip(g.shape, shape)):
        if ss == 1 and gs != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _make(data, parents, backward) -> Tensor:
    out = Tensor(data, requires_grad=any(p.requires_grad for p in parents))
    if out.requires_grad:
        out._parents = tuple(parents)
        out._backward = backward
    return out


# --- elementwise arithmetic (broadcasting) ---------------------------------

def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    try:
        data = a.data + b.data
    except ValueError:
        raise ShapeError(f"add: cannot broadcast {a.shape} + {b.shape}")

    def backward(g):
        _accum(a, _unbroadcast(g, a.shape))
        _accum(b, _unbroadcast(g, b.shape))

    return _make(data, (a, b), backward)


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    try:
        data = a.data - b.data
    except ValueError:
        raise ShapeError(f"sub: cannot broadcast {a.shape} - {b.shape}")

    def backward(g):
        _accum(a, _unbroadcast(g, a.shape))
        _accum(b, _unbroadcast(-g, b.shape))

    return _make(data, (a, b), backward)


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    try:
        data = a.data * b.data
    except ValueError:
        raise ShapeError(f"mul: cannot broadcast {a.shape} * {b.shape}")

    def backward(g):
        _accum(a, _unbroadcast(g * b.data, a.shape))
        _accum(b, _unbroadcast(g * a.data, b.shape))

    return _make(data, (a, b), backward)


def div(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    try:
        data = a.data / b.data
    except ValueError:
        raise ShapeError(f"div: cannot broadcast {a.shape} / {b.shape}")

    def backward(g):
        _accum(a, _unbroadcast(g / b.data, a.shape))
        _accum(b, _unbroadcast(-g * a.data / (b.data * b.data), b.shape))

    return _make(data, (a, b), backward)


def power(a, p: float) -> Tensor:
    a = as_tensor(a)
    data = a.data ** p

    def backward(g):
        _accum(a, g * p * a.data ** (p - 1.0))

    return _make(data, (a,), backward)


def exp(a) -> Tensor:
    a = as_tensor(a)
    data = np.exp(a.data)

    def backward(g):
        _accum(a, g * data)

    return _make(data, (a,), backward)


def log(a) -> Tensor:
    a = as_tensor(a)
    data = np.log(a.data)

    def backward(g):
        _accum(a, g / a.data)

    return _make(data, (a,), backward)


# --- linear algebra ---------------------------------------------------------

def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: {a.shape} @ {b.shape}")
    data = a.data @ b.data

    def backward(g):
        _accum(a, g @ b.data.T)
        _accum(b, a.data.T @ g)

    return _make(data, (a, b), backward)


def transpose(a) -> Tensor:
    a = as_tensor(a)
    if a.ndim != 2:
        raise ShapeError(f"transpose: expected 2-d, got {a.shape}")
    data = a.data.T.copy()

    def backward(g):
        _accum(a, g.T)

    return _make(data, (a,), backward)


def reshape(a, shape) -> Tensor:
    a = as_tensor(a)
    try:
        data = a.data.reshape(shape)
    except ValueError:
        raise ShapeError(f"reshape: {a.shape} -> {shape}")

    def backward(g):
        _accum(a, g.reshape(a.shape))

    return _make(data, (a,), backward)


# --- structure: concat / slice / gather -------------------------------------

def concat(tensors: Sequence, axis: int = 0) -> Tensor:
    ts = [as_tensor(t) for t in tensors]
    if not ts:
        raise ShapeError("concat: empty input list")
    try:
        data = np.concatenate([t.data for t in ts], axis=axis)
    except ValueError:
        raise ShapeError(f"concat: incompatible shapes {[t.shape for t in ts]} along axis {axis}")
    sizes = [t.shape[axis] for t in ts]
    offsets = np.cumsum([0] + sizes)

    def backward(g):
        for t, lo, hi in zip(ts, offsets[:-1], offsets[1:]):
            idx = [slice(None)] * g.ndim
            idx[axis] = slice(lo, hi)
            _accum(t, g[tuple(idx)])

    return _make(data, tuple(ts), backward)


def slice_axis(a, axis: int, start: int, stop: int) -> Tensor:
    a = as_tensor(a)
    if not (0 <= start <= stop <= a.shape[axis]):
        raise ShapeError(f"slice_axis: [{start}:{stop}] out of range for {a.shape} axis {axis}")
    idx = [slice(None)] * a.ndim
    idx[axis] = slice(start, stop)
    idx = tuple(idx)
    data = a.data[idx].copy()

    def backward(g):
        full = np.zeros_like(a.data)
        full[idx] = g
        _accum(a, full)

    return _make(data, (a,), backward)


def gather_rows(a, indices) -> Tensor:
    """Select rows (axis 0) by an integer index array; used for embedding
    lookup, boundary extraction, and compressor selection."""
    a = as_tensor(a)
    idx = np.asarray(indices, dtype=np.intp)
    if a.ndim == 0:
        raise ShapeError(f"gather_rows: scalar input {a.shape}")
    if idx.size and (idx.min() < 0 or idx.max() >= a.shape[0]):
        raise ShapeError(f"gather_rows: index out of range for {a.shape}")
    data = a.data[idx]

    def backward(g):
        full = np.zeros_like(a.data)
        np.add.at(full, idx, g)
        _accum(a, full)

    return _make(data, (a,), backward)


embedding = gather_rows  # table [V, d] indexed by token ids


# --- reductions --------------------------------------------------------------

def sum_(a, axis: int | None = None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    data = a.data.sum(axis=axis, keepdims=keepdims)

    def backward(g):
        if axis is None:
            _accum(a, np.broadcast_to(g, a.shape).copy())
        else:
            ge = g if keepdims else np.expand_dims(g, axis)
            _accum(a, np.broadcast_to(ge, a.shape).copy())

    return _make(data, (a,), backward)


def mean(a, axis: int | None = None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    n = a.size if axis is None else a.shape[axis]
    data = a.data.mean(axis=axis, keepdims=keepdims)

    def backward(g):
        if axis is None:
            _accum(a, np.broadcast_to(g / n, a.shape).copy())
        else:
            ge = g if keepdims else np.expand_dims(g, axis)
            _accum(a, np.broadcast_to(ge / n, a.shape).copy())

    return _make(data, (a,), backward)


# --- nonlinearities -----------------------------------------------------------

def relu(a) -> Tensor:
    a = as_tensor(a)
    data = np.maximum(a.data, 0.0)

    def backward(g):
        _accum(a, g * (a.data > 0))

    return _make(data, (a,), backward)


def leaky_relu(a, slope: float = 0.2) -> Tensor:
    a = as_tensor(a)
    data = np.where(a.data > 0, a.data, slope * a.data)

    def backward(g):
        _accum(a, g * np.where(a.data > 0, 1.0, slope))

    return _make(data, (a,), backward)


def elu(a) -> Tensor:
    a = as_tensor(a)
    neg = np.expm1(np.minimum(a.data, 0.0))
    data = np.where(a.data > 0, a.data, neg)

    def backward(g):
        _accum(a, g * np.where(a.data > 0, 1.0, neg + 1.0))

    return _make(data, (a,), backward)


def softmax(a, axis: int = -1) -> Tensor:
    a = as_tensor(a)
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    data = e / e.sum(axis=axis, keepdims=True)

    def backward(g):
        inner = (g * data).sum(axis=axis, keepdims=True)
        _accum(a, data * (g - inner))

    return _make(data, (a,), backward)


def masked_fill(a, mask, value: float) -> Tensor:
    """Replace entries where ``mask`` is True by ``value`` (a constant)."""
    a = as_tensor(a)
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != a.shape:
        raise ShapeError(f"masked_fill: mask {mask.shape} vs data {a.shape}")
    data = np.where(mask, np.asarray(value, dtype=a.data.dtype), a.data)

    def backward(g):
        _accum(a, np.where(mask, 0.0, g))

    return _make(data, (a,), backward)


def layer_norm(x, gain, bias, eps: float = 1e-5) -> Tensor:
    """Normalize the last axis to zero mean / unit variance, then scale+shift."""
    x, gain, bias = as_tensor(x), as_tensor(gain), as_tensor(bias)
    d = x.shape[-1]
    if gain.shape != (d,) or bias.shape != (d,):
        raise ShapeError(f"layer_norm: gain {gain.shape} / bias {bias.shape} vs features ({d},)")
    mu = x.data.mean(axis=-1, keepdims=True)
    var = x.data.var(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (x.data - mu) * inv
    data = xhat * gain.data + bias.data

    def backward(g):
        _accum(gain, (g * xhat).reshape(-1, d).sum(axis=0))
        _accum(bias, g.reshape(-1, d).sum(axis=0))
        gx = g * gain.data
        gm = gx.mean(axis=-1, keepdims=True)
        gxh = (gx * xhat).mean(axis=-1, keepdims=True)
        _accum(x, inv * (gx - gm - xhat * gxh))

    return _make(data, (x, gain, bias), backward)


def dropout(a, p: float, rng: np.random.Generator, train: bool) -> Tensor:
    """Inverted dropout; identity when not training or p == 0."""
    a = as_tensor(a)
    if not train or p == 0.0:
        return a
    if not (0.0 <= p < 1.0):
        raise NumericError(f"dropout: p={p} outside [0, 1)")
    keep = (rng.random(a.shape) >= p).astype(a.data.dtype)
    scale = 1.0 / (1.0 - p)
    data = a.data * keep * scale

    def backward(g):
        _accum(a, g * keep * scale)

    return _make(data, (a,), backward)


def cosine_sim(u, v) -> Tensor:
    """Cosine similarity of two 1-d tensors; 0 (with zero gradient) when
    either norm is below 1e-12."""
    u, v = as_tensor(u), as_tensor(v)
    if u.ndim != 1 or v.ndim != 1 or u.shape != v.shape:
        raise ShapeError(f"cosine_sim: {u.shape} vs {v.shape}")
    nu = np.linalg.norm(u.data)
    nv = np.linalg.norm(v.data)
    if nu < 1e-12 or nv < 1e-12:
        return Tensor(0.0)
    c = float(u.data @ v.data) / (nu * nv)

    def backward(g):
        _accum(u, g * (v.data / (nu * nv) - c * u.data / (nu * nu)))
        _accum(v, g * (u.data / (nu * nv) - c * v.data / (nv * nv)))

    return _make(np.asarray(c, dtype=_DTYPE), (u, v), backward)


def cross_entropy_smoothed(logits, targets, smoothing: float = 0.0,
                           ignore_index: int | None = None) -> Tensor:
    """Mean label-smoothed negative log-likelihood.

    The target distribution puts 1-smoothing on the gold class and spreads
    smoothing uniformly over the remaining V-1 classes. Steps whose target
    equals ``ignore_index`` contribute nothing.
    """
    logits = as_tensor(logits)
    targets = np.asarray(targets, dtype=np.intp)
    if logits.ndim != 2 or targets.ndim != 1 or logits.shape[0] != targets.shape[0]:
        raise ShapeError(f"cross_entropy: logits {logits.shape} vs targets {targets.shape}")
    t, v = logits.shape
    valid = np.ones(t, dtype=bool) if ignore_index is None else targets != ignore_index
    n_valid = int(valid.sum())
    if n_valid == 0:
        raise ShapeError("cross_entropy: every step is ignored")

    shifted = logits.data - logits.data.max(axis=1, keepdims=True)
    logz = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    logp = shifted - logz

    q = np.zeros((t, v), dtype=logits.data.dtype)
    rest = smoothing / (v - 1) if v > 1 else 0.0
    q[valid] = rest
    q[np.arange(t)[valid], targets[valid]] = 1.0 - smoothing
    loss = -(q * logp).sum() / n_valid

    def backward(g):
        p = np.exp(logp)
        d = (p - q) * valid[:, None]
        _accum(logits, g * d / n_valid)

    return _make(np.asarray(loss, dtype=_DTYPE), (logits,), backward)
