"""Minimal dense-tensor numerics: autodiff primitives, Adam, LR schedule, loss."""

from __future__ import annotations

import numpy as np

from ..errors import NumericError
from .optim import AdamState, LrSchedule, adam_step, lr_at
from .params import ParamSet, weighted_mean
from .tensor import (
    Tensor,
    add,
    avg_pool2d,
    concat,
    conv2d,
    cross_entropy,
    finite_checks,
    layer_norm,
    matmul,
    mean,
    mul,
    no_grad,
    relu,
    reshape,
    sigmoid,
    slice_,
    softmax,
    sum_,
    tanh,
    transpose,
)

__all__ = [
    "AdamState", "LrSchedule", "ParamSet", "Tensor",
    "adam_step", "add", "avg_pool2d", "concat", "conv2d", "cross_entropy",
    "finite_checks", "grad", "layer_norm", "lr_at", "matmul", "mean", "mul",
    "no_grad", "relu", "reshape", "sigmoid", "slice_", "softmax", "sum_",
    "tanh", "transpose", "weighted_mean",
]


def grad(loss_fn, params: ParamSet) -> ParamSet:
    """Gradient of a scalar-valued function of a ParamSet.

    Runs the fast path first; when a non-finite loss or gradient shows up, the
    forward is replayed with per-op checks so the error names the offender.
    """
    leaves = params.leaves()
    loss = loss_fn(leaves)
    if not np.all(np.isfinite(loss.data)):
        with finite_checks():
            loss_fn(params.leaves())
        raise NumericError("non-finite loss (offending op not reproducible)")
    loss.backward()
    out = []
    bad = None
    for name, leaf in leaves.segments:
        g = leaf.grad if leaf.grad is not None else np.zeros_like(leaf.data)
        if not np.all(np.isfinite(g)):
            bad = name
        out.append((name, g))
    if bad is not None:
        with finite_checks():
            loss2 = loss_fn(params.leaves())
            loss2.backward(check_each=True)
        raise NumericError(f"non-finite gradient for segment '{bad}'")
    return ParamSet.from_arrays(out)
