"""Adam with bias correction and the warmup + cosine learning-rate schedule."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from ..errors import ArgumentError
from .params import ParamSet


@dataclass
class AdamState:
    m: ParamSet
    v: ParamSet
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def init(cls, params: ParamSet, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8) -> "AdamState":
        return cls(m=params.zeros_like(), v=params.zeros_like(), t=0, beta1=beta1, beta2=beta2, eps=eps)


def adam_step(params: ParamSet, grads: ParamSet, state: AdamState, lr: float) -> tuple[ParamSet, AdamState]:
    """One bias-corrected Adam update; returns new params and advanced state.

    Moments are stored float32; the update arithmetic runs in float64 so that
    single steps agree with hand evaluation to well below 1e-9.
    """
    params.require_conformable(grads, "params/grads")
    params.require_conformable(state.m, "params/adam state")
    t = state.t + 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1 ** t
    c2 = 1.0 - b2 ** t
    new_p, new_m, new_v = [], [], []
    for (name, p), (_, g), (_, m), (_, v) in zip(
        params.segments, grads.segments, state.m.segments, state.v.segments
    ):
        dt = p.data.dtype
        g64 = g.data.astype(np.float64)
        m64 = b1 * m.data.astype(np.float64) + (1.0 - b1) * g64
        v64 = b2 * v.data.astype(np.float64) + (1.0 - b2) * g64 * g64
        step = lr * (m64 / c1) / (np.sqrt(v64 / c2) + state.eps)
        new_p.append((name, (p.data.astype(np.float64) - step).astype(dt)))
        new_m.append((name, m64.astype(dt)))
        new_v.append((name, v64.astype(dt)))
    return (
        ParamSet.from_arrays(new_p),
        replace(state, m=ParamSet.from_arrays(new_m), v=ParamSet.from_arrays(new_v), t=t),
    )


@dataclass(frozen=True)
class LrSchedule:
    """Linear warmup from 0 to lr_max, then cosine decay to lr_min."""

    total_steps: int
    warmup_steps: int
    lr_max: float = 5e-4
    lr_min: float = 1e-6

    def __post_init__(self):
        if not 0 <= self.warmup_steps < self.total_steps:
            raise ArgumentError(f"need 0 <= warmup ({self.warmup_steps}) < total ({self.total_steps})")
        if not self.lr_min < self.lr_max:
            raise ArgumentError(f"need lr_min < lr_max, got {self.lr_min} >= {self.lr_max}")

    @classmethod
    def for_run(cls, total_steps: int, warmup_frac: float = 0.05, lr_max: float = 5e-4, lr_min: float = 1e-6):
        total_steps = max(int(total_steps), 2)
        return cls(total_steps=total_steps, warmup_steps=int(warmup_frac * total_steps), lr_max=lr_max, lr_min=lr_min)


def lr_at(sched: LrSchedule, step: int) -> float:
    """Learning rate at an integer step; steps past the end clamp to lr_min."""
    if step < 0:
        raise ArgumentError(f"negative step {step}")
    if step > sched.total_steps:
        return sched.lr_min
    if step < sched.warmup_steps:
        return sched.lr_max * step / sched.warmup_steps
    s = (step - sched.warmup_steps) / (sched.total_steps - sched.warmup_steps)
    return sched.lr_min + 0.5 * (sched.lr_max - sched.lr_min) * (1.0 + math.cos(math.pi * s))
