"""Minimal reverse-mode autodiff over numpy arrays.

A Tensor wraps an ndarray and, when gradients are enabled and an input
requires them, records a backward closure on a tape.  Calling
:func:`backward` on a scalar output accumulates d(output)/d(leaf) into each
reachable leaf's ``grad`` (repeated calls accumulate until cleared).  Only
what the network blocks need is implemented: elementwise arithmetic with
broadcasting, 2-D matmul, reductions, slicing/concat, the usual activations,
and fused linear/layer-norm ops that keep the graph small.
"""

from __future__ import annotations

import contextlib
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np

_GRAD_ENABLED = True


@contextlib.contextmanager
def no_grad():
    """Disable graph recording inside the block (rollouts, target values)."""
    global _GRAD_ENABLED
    prev = _GRAD_ENABLED
    _GRAD_ENABLED = False
    try:
        yield
    finally:
        _GRAD_ENABLED = prev


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward_fn")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data)
        self.grad: Optional[np.ndarray] = None
        self.requires_grad = requires_grad
        self._parents: Tuple["Tensor", ...] = ()
        self._backward_fn = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def item(self) -> float:
        return float(self.data)

    def zero_grad(self):
        self.grad = None

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    # operator sugar
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(_as_tensor(other, self.dtype), self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(_as_tensor(other, self.dtype), self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(_as_tensor(other, self.dtype), self)

    def __truediv__(self, other):
        return div(self, other)

    def __matmul__(self, other):
        return matmul(self, other)

    def __neg__(self):
        return neg(self)


def _as_tensor(value, dtype=None) -> Tensor:
    if isinstance(value, Tensor):
        return value
    arr = np.asarray(value, dtype=dtype)
    return Tensor(arr)


def _node(data, parents: Tuple[Tensor, ...], backward_fn) -> Tensor:
    """Create a graph node only if recording is on and some parent needs it."""
    out = Tensor(data)
    if _GRAD_ENABLED and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(p for p in parents if p.requires_grad)
        out._backward_fn = backward_fn
    return out


def _accumulate(t: Tensor, g: np.ndarray):
    # backward closures never mutate their upstream buffer in place, so the
    # first accumulation can alias it; later ones allocate via +
    if t.grad is None:
        t.grad = g if isinstance(g, np.ndarray) else np.asarray(g)
    else:
        t.grad = t.grad + g


def _unbroadcast(g: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    """Reduce an upstream gradient back to a broadcast input's shape."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


def backward(output: Tensor):
    """Backpropagate from a scalar output through the recorded graph."""
    if output.data.size != 1:
        raise ValueError("backward requires a scalar output")
    if not output.requires_grad:
        raise ValueError("output is detached from any parameter")

    topo: List[Tensor] = []
    visited = set()
    stack: List[Tuple[Tensor, bool]] = [(output, False)]
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
            if id(p) not in visited:
                stack.append((p, False))

    output.grad = np.ones_like(output.data)
    for node in reversed(topo):
        if node._backward_fn is not None and node.grad is not None:
            node._backward_fn(node.grad)
            if node is not output:
                node.grad = None  # free interior grads; leaves keep theirs


# ---------------------------------------------------------------------------
# primitive ops


def add(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    out_data = a.data + b.data

    def bw(g):
        if a.requires_grad:
            _accumulate(a, _unbroadcast(g, a.data.shape))
        if b.requires_grad:
            _accumulate(b, _unbroadcast(g, b.data.shape))

    return _node(out_data, (a, b), bw)


def sub(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    out_data = a.data - b.data

    def bw(g):
        if a.requires_grad:
            _accumulate(a, _unbroadcast(g, a.data.shape))
        if b.requires_grad:
            _accumulate(b, _unbroadcast(-g, b.data.shape))

    return _node(out_data, (a, b), bw)


def mul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    out_data = a.data * b.data

    def bw(g):
        if a.requires_grad:
            _accumulate(a, _unbroadcast(g * b.data, a.data.shape))
        if b.requires_grad:
            _accumulate(b, _unbroadcast(g * a.data, b.data.shape))

    return _node(out_data, (a, b), bw)


def div(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    out_data = a.data / b.data

    def bw(g):
        if a.requires_grad:
            _accumulate(a, _unbroadcast(g / b.data, a.data.shape))
        if b.requires_grad:
            _accumulate(b, _unbroadcast(-g * out_data / b.data, b.data.shape))

    return _node(out_data, (a, b), bw)


def neg(a: Tensor) -> Tensor:
    a = _as_tensor(a)

    def bw(g):
        _accumulate(a, -g)

    return _node(-a.data, (a,), bw)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    out_data = a.data @ b.data

    def bw(g):
        if a.requires_grad:
            _accumulate(a, g @ b.data.T)
        if b.requires_grad:
            _accumulate(b, a.data.T @ g)

    return _node(out_data, (a, b), bw)


def linear(x: Tensor, w: Tensor, b: Optional[Tensor] = None) -> Tensor:
    """Fused x @ w (+ bias row vector)."""
    out_data = x.data @ w.data
    if b is not None:
        out_data = out_data + b.data

    def bw(g):
        if x.requires_grad:
            _accumulate(x, g @ w.data.T)
        if w.requires_grad:
            _accumulate(w, x.data.T @ g)
        if b is not None and b.requires_grad:
            _accumulate(b, g.sum(axis=0))

    parents = (x, w) if b is None else (x, w, b)
    return _node(out_data, parents, bw)


def tensor_sum(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    out_data = a.data.sum(axis=axis, keepdims=keepdims)

    def bw(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        _accumulate(a, np.broadcast_to(g, a.data.shape))

    return _node(out_data, (a,), bw)


def mean(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    out_data = a.data.mean(axis=axis, keepdims=keepdims)
    count = a.data.size if axis is None else a.data.shape[axis]

    def bw(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        _accumulate(a, np.broadcast_to(g, a.data.shape) / count)

    return _node(out_data, (a,), bw)


def reshape(a: Tensor, shape) -> Tensor:
    out_data = a.data.reshape(shape)

    def bw(g):
        _accumulate(a, g.reshape(a.data.shape))

    return _node(out_data, (a,), bw)


def narrow(a: Tensor, axis: int, start: int, length: int) -> Tensor:
    index = [slice(None)] * a.data.ndim
    index[axis] = slice(start, start + length)
    index = tuple(index)
    out_data = a.data[index]

    def bw(g):
        full = np.zeros_like(a.data)
        full[index] = g
        _accumulate(a, full)

    return _node(out_data, (a,), bw)


def concat(parts: Sequence[Tensor], axis: int = 1) -> Tensor:
    parts = [_as_tensor(p) for p in parts]
    out_data = np.concatenate([p.data for p in parts], axis=axis)
    sizes = [p.data.shape[axis] for p in parts]

    def bw(g):
        offset = 0
        for p, size in zip(parts, sizes):
            if p.requires_grad:
                index = [slice(None)] * g.ndim
                index[axis] = slice(offset, offset + size)
                _accumulate(p, g[tuple(index)])
            offset += size

    return _node(out_data, tuple(parts), bw)


def tanh(a: Tensor) -> Tensor:
    out_data = np.tanh(a.data)

    def bw(g):
        _accumulate(a, g * (1.0 - out_data**2))

    return _node(out_data, (a,), bw)


def sigmoid(a: Tensor) -> Tensor:
    out_data = 1.0 / (1.0 + np.exp(-a.data))

    def bw(g):
        _accumulate(a, g * out_data * (1.0 - out_data))

    return _node(out_data, (a,), bw)


def relu(a: Tensor) -> Tensor:
    out_data = np.maximum(a.data, 0.0)

    def bw(g):
        _accumulate(a, g * (a.data > 0))

    return _node(out_data, (a,), bw)


def exp(a: Tensor) -> Tensor:
    out_data = np.exp(a.data)

    def bw(g):
        _accumulate(a, g * out_data)

    return _node(out_data, (a,), bw)


def log(a: Tensor) -> Tensor:
    out_data = np.log(a.data)

    def bw(g):
        _accumulate(a, g / a.data)

    return _node(out_data, (a,), bw)


def sqrt(a: Tensor) -> Tensor:
    out_data = np.sqrt(a.data)

    def bw(g):
        _accumulate(a, g * 0.5 / out_data)

    return _node(out_data, (a,), bw)


def square(a: Tensor) -> Tensor:
    out_data = a.data**2

    def bw(g):
        _accumulate(a, g * 2.0 * a.data)

    return _node(out_data, (a,), bw)


def softplus(a: Tensor) -> Tensor:
    # log(1 + exp(x)) evaluated stably for both signs of x.
    out_data = np.maximum(a.data, 0.0) + np.log1p(np.exp(-np.abs(a.data)))

    def bw(g):
        _accumulate(a, g / (1.0 + np.exp(-a.data)))

    return _node(out_data, (a,), bw)


def clip(a: Tensor, lo: float, hi: float) -> Tensor:
    out_data = np.clip(a.data, lo, hi)

    def bw(g):
        _accumulate(a, g * ((a.data >= lo) & (a.data <= hi)))

    return _node(out_data, (a,), bw)


def layer_norm(a: Tensor, eps: float = 1e-5) -> Tensor:
    """Fused feature-wise normalization (x - mean) / (std + eps) over the
    last axis, with no learned affine."""
    x = a.data
    n = x.shape[-1]
    mu = x.sum(axis=-1, keepdims=True) / n
    c = x - mu
    s = np.sqrt((c * c).sum(axis=-1, keepdims=True) / n)
    d = s + eps
    out_data = c / d

    def bw(g):
        # dL/dx = [g - mean(g)] / d - c * sum(g*c) / (d^2 * n * s)
        # c == 0 wherever s == 0, so the tiny floor only avoids 0/0 there
        gc = (g * c).sum(axis=-1, keepdims=True)
        term = c * (gc / (d * n * np.maximum(s, np.finfo(s.dtype).tiny)))
        _accumulate(a, (g - g.sum(axis=-1, keepdims=True) / n - term) / d)

    return _node(out_data, (a,), bw)


def packed_layer_norm(a: Tensor, groups: int, eps: float = 1e-5) -> Tensor:
    """Layer-normalize each of ``groups`` equal column blocks of a 2-D
    tensor independently (one fused node for all gate blocks)."""
    rows, cols = a.data.shape
    return reshape(layer_norm(reshape(a, (rows, groups, cols // groups)), eps), (rows, cols))


def _ln_forward(v3: np.ndarray, eps: float):
    """Blockwise LN over the last axis; returns (y, c, s, d) for backward."""
    n = v3.shape[-1]
    mu = v3.sum(axis=-1, keepdims=True) / n
    c = v3 - mu
    s = np.sqrt((c * c).sum(axis=-1, keepdims=True) / n)
    d = s + eps
    return c / d, c, s, d


def _ln_backward(gy: np.ndarray, c: np.ndarray, s: np.ndarray, d: np.ndarray) -> np.ndarray:
    n = c.shape[-1]
    gc = (gy * c).sum(axis=-1, keepdims=True)
    term = c * (gc / (d * n * np.maximum(s, np.finfo(s.dtype).tiny)))
    return (gy - gy.sum(axis=-1, keepdims=True) / n - term) / d


def lngru_step(xw_ln: Tensor, h: Tensor, u: Tensor, eps: float) -> Tensor:
    """One fused layer-normalized GRU step.

    xw_ln holds the already-normalized input-side pre-activations packed
    [r | z | c]; the recurrent side is normalized blockwise here:

        r = sigmoid(xw_r + LN(h U_r)),  z = sigmoid(xw_z + LN(h U_z))
        cand = tanh(xw_c + r * LN(h U_c)),  h' = (1 - z) * h + z * cand
    """
    rows = xw_ln.data.shape[0]
    hd = xw_ln.data.shape[1] // 3
    uh = h.data @ u.data
    y3, c_ln, s_ln, d_ln = _ln_forward(uh.reshape(rows, 3, hd), eps)
    y = y3.reshape(rows, 3 * hd)
    r = 1.0 / (1.0 + np.exp(-(xw_ln.data[:, :hd] + y[:, :hd])))
    z = 1.0 / (1.0 + np.exp(-(xw_ln.data[:, hd : 2 * hd] + y[:, hd : 2 * hd])))
    y_c = y[:, 2 * hd :]
    cand = np.tanh(xw_ln.data[:, 2 * hd :] + r * y_c)
    out_data = (1.0 - z) * h.data + z * cand

    def bw(g):
        gz = g * (cand - h.data) * z * (1.0 - z)
        gcand = g * z * (1.0 - cand * cand)
        gr = gcand * y_c * r * (1.0 - r)
        if xw_ln.requires_grad:
            _accumulate(xw_ln, np.concatenate([gr, gz, gcand], axis=1))
        gy = np.concatenate([gr, gz, gcand * r], axis=1).reshape(rows, 3, hd)
        guh = _ln_backward(gy, c_ln, s_ln, d_ln).reshape(rows, 3 * hd)
        if h.requires_grad:
            _accumulate(h, g * (1.0 - z) + guh @ u.data.T)
        if u.requires_grad:
            _accumulate(u, h.data.T @ guh)

    return _node(out_data, (xw_ln, h, u), bw)


def gru_step(xw: Tensor, h: Tensor, u: Tensor, b_hh: Tensor) -> Tensor:
    """One fused plain GRU step (same gate convention, biases, no LN)."""
    hd = xw.data.shape[1] // 3
    uh = h.data @ u.data + b_hh.data
    r = 1.0 / (1.0 + np.exp(-(xw.data[:, :hd] + uh[:, :hd])))
    z = 1.0 / (1.0 + np.exp(-(xw.data[:, hd : 2 * hd] + uh[:, hd : 2 * hd])))
    uh_c = uh[:, 2 * hd :]
    cand = np.tanh(xw.data[:, 2 * hd :] + r * uh_c)
    out_data = (1.0 - z) * h.data + z * cand

    def bw(g):
        gz = g * (cand - h.data) * z * (1.0 - z)
        gcand = g * z * (1.0 - cand * cand)
        gr = gcand * uh_c * r * (1.0 - r)
        if xw.requires_grad:
            _accumulate(xw, np.concatenate([gr, gz, gcand], axis=1))
        guh = np.concatenate([gr, gz, gcand * r], axis=1)
        if h.requires_grad:
            _accumulate(h, g * (1.0 - z) + guh @ u.data.T)
        if u.requires_grad:
            _accumulate(u, h.data.T @ guh)
        if b_hh.requires_grad:
            _accumulate(b_hh, guh.sum(axis=0))

    return _node(out_data, (xw, h, u, b_hh), bw)


def zero_grads(params: Iterable[Tensor]):
    for p in params:
        p.grad = None
