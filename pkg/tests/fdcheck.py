"""Central finite-difference gradient oracle.

Independent of the autodiff engine: it only calls the forward function, twice
per coordinate. The perturbed evaluations run in float64 (the engine's ops
preserve dtype) so the oracle's own noise stays far below the 1e-3 tolerance;
the reverse-mode gradient under test is still computed at the production
float32 precision.
"""

from __future__ import annotations

import numpy as np

from jamlab.numcore import ParamSet


def finite_diff_grad(loss_fn, params: ParamSet, h: float = 1e-3) -> ParamSet:
    """Central differences (f(x+h) - f(x-h)) / 2h for every coordinate."""
    p64 = params.map(lambda a: a.astype(np.float64))
    out = []
    for name, t in p64.segments:
        flat = t.data.reshape(-1)
        g = np.zeros(flat.size, dtype=np.float64)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            fp = float(loss_fn(p64).data)
            flat[i] = orig - h
            fm = float(loss_fn(p64).data)
            flat[i] = orig
            g[i] = (fp - fm) / (2.0 * h)
        out.append((name, g.reshape(t.data.shape)))
    return ParamSet.from_arrays(out)


def max_rel_err(a: ParamSet, b: ParamSet, floor: float = 1e-4) -> float:
    """max |a-b| / max(|a|, |b|, floor) over all coordinates."""
    worst = 0.0
    for (_, ta), (_, tb) in zip(a.segments, b.segments):
        if ta.size == 0:
            continue
        x = ta.data.astype(np.float64)
        y = tb.data.astype(np.float64)
        denom = np.maximum(np.maximum(np.abs(x), np.abs(y)), floor)
        worst = max(worst, float(np.max(np.abs(x - y) / denom)))
    return worst


def nudge_from_kinks(a: np.ndarray, margin: float = 0.02) -> np.ndarray:
    """Push values away from 0 so FD never straddles a relu-style kink."""
    return a + np.sign(a) * margin


def sampled_fd_check(loss_fn, params: ParamSet, ad: ParamSet, rng: np.random.Generator,
                     coords_per_segment: int = 40, h: float = 1e-3,
                     floor: float = 1e-4) -> float:
    """Check AD against central differences on random coordinates of each segment.

    Returns the worst relative error over the sampled coordinates. Keeps
    whole-model checks tractable: a full sweep would need two forward passes
    per parameter.
    """
    p64 = params.map(lambda a: a.astype(np.float64))
    worst = 0.0
    for (name, t), (_, g) in zip(p64.segments, ad.segments):
        flat = t.data.reshape(-1)
        gflat = g.data.reshape(-1)
        if flat.size == 0:
            continue
        idx = rng.choice(flat.size, size=min(coords_per_segment, flat.size), replace=False)
        for i in idx:
            orig = flat[i]
            flat[i] = orig + h
            fp = float(loss_fn(p64).data)
            flat[i] = orig - h
            fm = float(loss_fn(p64).data)
            flat[i] = orig
            fd = (fp - fm) / (2.0 * h)
            a = float(gflat[i])
            err = abs(a - fd) / max(abs(a), abs(fd), floor)
            worst = max(worst, err)
    return worst
