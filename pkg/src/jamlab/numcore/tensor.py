"""Dense float tensors with reverse-mode differentiation.

Define-by-run: every primitive builds a fresh graph node, so a graph lives for
exactly one forward/backward pass and is confined to the thread that built it.
Arrays are float32 by default; float64 inputs are preserved, which the gradient
oracle tests use to sharpen finite-difference comparisons.
"""

from __future__ import annotations

import threading
from contextlib import contextmanager

import numpy as np

from ..errors import NumericError, ShapeError

_state = threading.local()


def _grad_enabled() -> bool:
    return getattr(_state, "grad_enabled", True)


def _check_finite() -> bool:
    return getattr(_state, "check_finite", False)


@contextmanager
def no_grad():
    """Run forwards without recording the graph (evaluation mode)."""
    prev = _grad_enabled()
    _state.grad_enabled = False
    try:
        yield
    finally:
        _state.grad_enabled = prev


@contextmanager
def finite_checks(enabled: bool = True):
    """Verify every primitive output is finite; slow, used for diagnostics."""
    prev = _check_finite()
    _state.check_finite = enabled
    try:
        yield
    finally:
        _state.check_finite = prev


def _as_array(data, like: np.ndarray | None = None) -> np.ndarray:
    a = np.asarray(data)
    if a.dtype not in (np.float32, np.float64):
        a = a.astype(np.float32 if like is None else like.dtype)
    return a


class Tensor:
    """A numpy array plus the bookkeeping needed for reverse-mode autodiff."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "op")

    def __init__(self, data, requires_grad: bool = False, parents=(), backward=None, op: str = "leaf"):
        self.data = _as_array(data)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self._parents = parents
        self._backward = backward
        self.op = op

    @property
    def shape(self):
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def dtype(self):
        return self.data.dtype

    def item(self) -> float:
        return float(self.data)

    def __repr__(self):
        return f"Tensor(shape={self.shape}, op={self.op})"

    # graph assembly -------------------------------------------------------

    def _accum(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.zeros(self.data.shape, dtype=self.data.dtype)
        self.grad += g

    def backward(self, check_each: bool = False) -> None:
        """Backpropagate from a scalar root, accumulating into .grad fields."""
        if self.size != 1:
            raise ShapeError(f"backward root must be scalar, got shape {self.shape}")
        topo: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
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
        self.grad = np.ones(self.data.shape, dtype=self.data.dtype)
        for node in reversed(topo):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)
                if check_each:
                    for p in node._parents:
                        if p.grad is not None and not np.all(np.isfinite(p.grad)):
                            raise NumericError(f"non-finite gradient flowing into op '{p.op}'")

    # operator sugar -------------------------------------------------------

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(self, other)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(self, other)

    def __sub__(self, other):
        return add(self, mul(_lift(other, self), -1.0))

    def __rsub__(self, other):
        return add(_lift(other, self), mul(self, -1.0))

    def __matmul__(self, other):
        return matmul(self, other)

    def reshape(self, *shape):
        return reshape(self, shape if len(shape) != 1 or not isinstance(shape[0], (tuple, list)) else shape[0])

    def transpose(self, *axes):
        return transpose(self, axes if len(axes) != 1 or not isinstance(axes[0], (tuple, list)) else axes[0])


def _lift(x, like: Tensor) -> Tensor:
    if isinstance(x, Tensor):
        return x
    return Tensor(np.asarray(x, dtype=like.dtype))


def _make(data: np.ndarray, parents: tuple[Tensor, ...], backward, op: str) -> Tensor:
    if _check_finite() and not np.all(np.isfinite(data)):
        raise NumericError(f"non-finite values produced by op '{op}'")
    if _grad_enabled() and any(p.requires_grad for p in parents):
        return Tensor(data, requires_grad=True, parents=parents, backward=backward, op=op)
    return Tensor(data, op=op)


# primitives ---------------------------------------------------------------


def add(a: Tensor, b) -> Tensor:
    """Elementwise sum; supports equal shapes or a trailing-axis bias vector."""
    b = _lift(b, a)
    out = a.data + b.data
    ashape, bshape = a.data.shape, b.data.shape

    def backward(g):
        if a.requires_grad:
            a._accum(_unbroadcast(g, ashape))
        if b.requires_grad:
            b._accum(_unbroadcast(g, bshape))

    return _make(out, (a, b), backward, "add")


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


def mul(a: Tensor, b) -> Tensor:
    b = _lift(b, a)
    out = a.data * b.data
    ashape, bshape = a.data.shape, b.data.shape

    def backward(g):
        if a.requires_grad:
            a._accum(_unbroadcast(g * b.data, ashape))
        if b.requires_grad:
            b._accum(_unbroadcast(g * a.data, bshape))

    return _make(out, (a, b), backward, "mul")


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product: either same-rank stacked operands or an ND @ 2D weight."""
    if a.data.ndim < 2 or b.data.ndim < 2:
        raise ShapeError("matmul operands must have rank >= 2")
    if a.data.ndim != b.data.ndim and b.data.ndim != 2:
        raise ShapeError(f"unsupported matmul ranks {a.data.ndim} @ {b.data.ndim}")
    if a.data.shape[-1] != b.data.shape[-2]:
        raise ShapeError(f"matmul inner dims differ: {a.data.shape} @ {b.data.shape}")
    out = a.data @ b.data

    def backward(g):
        if a.requires_grad:
            a._accum(g @ np.swapaxes(b.data, -1, -2))
        if b.requires_grad:
            if b.data.ndim == 2 and a.data.ndim > 2:
                k = a.data.shape[-1]
                n = g.shape[-1]
                b._accum(a.data.reshape(-1, k).T @ g.reshape(-1, n))
            else:
                b._accum(np.swapaxes(a.data, -1, -2) @ g)

    return _make(out, (a, b), backward, "matmul")


def relu(x: Tensor) -> Tensor:
    out = np.maximum(x.data, 0)

    def backward(g):
        if x.requires_grad:
            x._accum(g * (x.data > 0))

    return _make(out, (x,), backward, "relu")


def tanh(x: Tensor) -> Tensor:
    out = np.tanh(x.data)

    def backward(g):
        if x.requires_grad:
            x._accum(g * (1.0 - out * out))

    return _make(out, (x,), backward, "tanh")


def sigmoid(x: Tensor) -> Tensor:
    out = 1.0 / (1.0 + np.exp(-x.data))

    def backward(g):
        if x.requires_grad:
            x._accum(g * out * (1.0 - out))

    return _make(out, (x,), backward, "sigmoid")


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    z = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(z)
    out = e / e.sum(axis=axis, keepdims=True)

    def backward(g):
        if x.requires_grad:
            dot = (g * out).sum(axis=axis, keepdims=True)
            x._accum(out * (g - dot))

    return _make(out, (x,), backward, "softmax")


def layer_norm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalize over the last axis, then scale and shift."""
    mu = x.data.mean(axis=-1, keepdims=True)
    var = x.data.var(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + np.asarray(eps, dtype=x.dtype))
    xhat = (x.data - mu) * inv
    out = xhat * gamma.data + beta.data

    def backward(g):
        if gamma.requires_grad:
            gamma._accum((g * xhat).reshape(-1, x.data.shape[-1]).sum(axis=0))
        if beta.requires_grad:
            beta._accum(g.reshape(-1, x.data.shape[-1]).sum(axis=0))
        if x.requires_grad:
            dxhat = g * gamma.data
            m1 = dxhat.mean(axis=-1, keepdims=True)
            m2 = (dxhat * xhat).mean(axis=-1, keepdims=True)
            x._accum(inv * (dxhat - m1 - xhat * m2))

    return _make(out, (x, gamma, beta), backward, "layer_norm")


def mean(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    out = x.data.mean(axis=axis, keepdims=keepdims)
    count = x.data.size if axis is None else np.prod([x.data.shape[a] for a in np.atleast_1d(axis)])

    def backward(g):
        if x.requires_grad:
            gg = np.asarray(g)
            if not keepdims and axis is not None:
                gg = np.expand_dims(gg, axis=axis)
            x._accum(np.broadcast_to(gg, x.data.shape) / x.dtype.type(count))

    return _make(out, (x,), backward, "mean")


def sum_(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    out = x.data.sum(axis=axis, keepdims=keepdims)

    def backward(g):
        if x.requires_grad:
            gg = np.asarray(g)
            if not keepdims and axis is not None:
                gg = np.expand_dims(gg, axis=axis)
            x._accum(np.broadcast_to(gg, x.data.shape).copy())

    return _make(out, (x,), backward, "sum")


def concat(parts: list[Tensor], axis: int = -1) -> Tensor:
    out = np.concatenate([p.data for p in parts], axis=axis)
    sizes = [p.data.shape[axis] for p in parts]
    offsets = np.cumsum([0] + sizes)

    def backward(g):
        for p, lo, hi in zip(parts, offsets[:-1], offsets[1:]):
            if p.requires_grad:
                idx = [slice(None)] * g.ndim
                idx[axis] = slice(lo, hi)
                p._accum(g[tuple(idx)])

    return _make(out, tuple(parts), backward, "concat")


def slice_(x: Tensor, start: int, stop: int, axis: int = 0) -> Tensor:
    """Contiguous index range along one axis (the 'indexing' primitive)."""
    idx = [slice(None)] * x.data.ndim
    idx[axis] = slice(start, stop)
    idx = tuple(idx)
    out = x.data[idx]

    def backward(g):
        if x.requires_grad:
            if x.grad is None:
                x.grad = np.zeros(x.data.shape, dtype=x.data.dtype)
            x.grad[idx] += g

    return _make(out, (x,), backward, "slice")


def reshape(x: Tensor, shape) -> Tensor:
    out = x.data.reshape(shape)

    def backward(g):
        if x.requires_grad:
            x._accum(g.reshape(x.data.shape))

    return _make(out, (x,), backward, "reshape")


def transpose(x: Tensor, axes) -> Tensor:
    axes = tuple(axes)
    inv = tuple(np.argsort(axes))
    out = x.data.transpose(axes)

    def backward(g):
        if x.requires_grad:
            x._accum(g.transpose(inv))

    return _make(out, (x,), backward, "transpose")


def conv2d(x: Tensor, w: Tensor, b: Tensor | None = None, stride: int = 1, padding: int = 0) -> Tensor:
    """2-D convolution, NCHW input and OIHW kernel, via im2col + GEMM."""
    if x.data.ndim != 4 or w.data.ndim != 4:
        raise ShapeError(f"conv2d expects 4-D input/kernel, got {x.data.shape} and {w.data.shape}")
    bsz, cin, h, wd = x.data.shape
    cout, cin_w, kh, kw = w.data.shape
    if cin != cin_w:
        raise ShapeError(f"conv2d channel mismatch: input {cin} vs kernel {cin_w}")
    xp = np.pad(x.data, ((0, 0), (0, 0), (padding, padding), (padding, padding))) if padding else x.data
    oh = (h + 2 * padding - kh) // stride + 1
    ow = (wd + 2 * padding - kw) // stride + 1
    win = np.lib.stride_tricks.sliding_window_view(xp, (kh, kw), axis=(2, 3))[:, :, ::stride, ::stride]
    cols = np.ascontiguousarray(win.transpose(0, 2, 3, 1, 4, 5)).reshape(bsz * oh * ow, cin * kh * kw)
    wmat = w.data.reshape(cout, -1)
    out2 = cols @ wmat.T
    if b is not None:
        out2 = out2 + b.data
    out = out2.reshape(bsz, oh, ow, cout).transpose(0, 3, 1, 2)

    def backward(g):
        gm = np.ascontiguousarray(g.transpose(0, 2, 3, 1)).reshape(bsz * oh * ow, cout)
        if w.requires_grad:
            w._accum((gm.T @ cols).reshape(w.data.shape))
        if b is not None and b.requires_grad:
            b._accum(gm.sum(axis=0))
        if x.requires_grad:
            dcols = (gm @ wmat).reshape(bsz, oh, ow, cin, kh, kw).transpose(0, 3, 1, 2, 4, 5)
            dxp = np.zeros_like(xp)
            for ki in range(kh):
                for kj in range(kw):
                    dxp[:, :, ki:ki + stride * oh:stride, kj:kj + stride * ow:stride] += dcols[..., ki, kj]
            x._accum(dxp[:, :, padding:padding + h, padding:padding + wd] if padding else dxp)

    parents = (x, w) if b is None else (x, w, b)
    return _make(out, parents, backward, "conv2d")


def avg_pool2d(x: Tensor, kernel: int) -> Tensor:
    """Non-overlapping average pooling on NCHW input; spatial dims must divide."""
    bsz, c, h, w = x.data.shape
    if h % kernel or w % kernel:
        raise ShapeError(f"avg_pool2d kernel {kernel} does not divide spatial dims {(h, w)}")
    v = x.data.reshape(bsz, c, h // kernel, kernel, w // kernel, kernel)
    out = v.mean(axis=(3, 5))

    def backward(g):
        if x.requires_grad:
            gg = g[:, :, :, None, :, None] / x.dtype.type(kernel * kernel)
            x._accum(np.broadcast_to(gg, v.shape).reshape(x.data.shape))

    return _make(out, (x,), backward, "avg_pool2d")


def cross_entropy(logits: Tensor, labels, n_classes: int | None = None) -> Tensor:
    """Mean cross-entropy of logits against integer labels.

    Accepts a single logit vector or a [batch, classes] matrix; fused
    log-softmax keeps it stable for large logits.
    """
    from ..errors import ArgumentError

    lab = np.atleast_1d(np.asarray(labels, dtype=np.int64))
    z = logits.data if logits.data.ndim == 2 else logits.data[None, :]
    if lab.shape[0] != z.shape[0]:
        raise ShapeError(f"{lab.shape[0]} labels for {z.shape[0]} logit rows")
    if lab.min() < 0 or lab.max() >= z.shape[1]:
        raise ArgumentError(f"label out of range [0, {z.shape[1]}): {lab}")
    zs = z - z.max(axis=1, keepdims=True)
    logsumexp = np.log(np.exp(zs).sum(axis=1, keepdims=True))
    logp = zs - logsumexp
    bsz = z.shape[0]
    out = -logp[np.arange(bsz), lab].mean()

    def backward(g):
        if logits.requires_grad:
            d = np.exp(logp)
            d[np.arange(bsz), lab] -= 1.0
            d *= np.asarray(g, dtype=z.dtype) / z.dtype.type(bsz)
            logits._accum(d.reshape(logits.data.shape))

    return _make(np.asarray(out, dtype=z.dtype), (logits,), backward, "cross_entropy")
