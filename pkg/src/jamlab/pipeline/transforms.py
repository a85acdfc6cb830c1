"""Per-window transforms: alignment, uniform-grid interpolation, temporal
downsampling, min-max normalization and training-time image augmentation."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..errors import AlignmentError, ArgumentError, DataError
from ..kpisynth import KpiSampleStream
from ..rfsynth import Spectrogram
from ..seeding import rng_from

IMAGENET_MEAN = np.array([0.485, 0.456, 0.406], dtype=np.float32)
IMAGENET_STD = np.array([0.229, 0.224, 0.225], dtype=np.float32)


@dataclass
class KpiWindow:
    """Uniform-grid multi-channel KPI tensor for one window."""

    values: np.ndarray  # [T, N] float32
    grid_dt_ms: float
    window_index: int = -1

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float32)
        if self.values.ndim != 2:
            raise ArgumentError(f"KpiWindow values must be TxN, got {self.values.shape}")


@dataclass
class MultimodalSample:
    spectrogram: Spectrogram
    kpi: KpiWindow
    label: int
    scenario: dict = field(default_factory=dict)


def align(spec: Spectrogram, kpi: KpiWindow) -> tuple[Spectrogram, KpiWindow]:
    """Admit a (spectrogram, KPI) pair only when both come from the same window."""
    if spec.window_index != kpi.window_index:
        raise AlignmentError(
            f"window indices differ: spectrogram {spec.window_index} vs kpi {kpi.window_index}"
        )
    return spec, kpi


def interpolate_uniform(stream: KpiSampleStream, grid_len: int, window_ms: float) -> np.ndarray:
    """Piecewise-linear resample of every channel onto grid_len equispaced points.

    Points outside the sampled span take the nearest endpoint value.
    """
    grid = np.arange(grid_len) * (window_ms / grid_len)
    out = np.empty((grid_len, len(stream.values)), dtype=np.float32)
    for i, (t, v) in enumerate(zip(stream.timestamps, stream.values)):
        if len(t) < 2:
            raise DataError(f"channel '{stream.channel_names[i]}' has {len(t)} samples; need >= 2")
        out[:, i] = np.interp(grid, t, v.astype(np.float64)).astype(np.float32)
    return out


def atd_downsample(grid: np.ndarray, target_len: int = 256, method: str = "stride") -> np.ndarray:
    """Reduce a TxN grid to target_len steps by fixed-stride picks or bin means."""
    t_grid = grid.shape[0]
    if t_grid < target_len:
        raise ArgumentError(f"cannot downsample {t_grid} steps to {target_len} (no upsampling)")
    if method == "stride":
        idx = (np.arange(target_len) * t_grid) // target_len
        return np.ascontiguousarray(grid[idx])
    if method == "avgpool":
        edges = (np.arange(target_len + 1) * t_grid) // target_len
        return np.stack([grid[a:b].mean(axis=0) for a, b in zip(edges[:-1], edges[1:])]).astype(grid.dtype)
    raise ArgumentError(f"unknown ATD method {method!r}; expected 'stride' or 'avgpool'")


def normalize_kpi(values: np.ndarray, bounds: list[tuple[float, float]]) -> np.ndarray:
    """Channel-wise (v - min) / (max - min), clamped to [0, 1]; flat channels map to 0."""
    lo = np.asarray([b[0] for b in bounds], dtype=np.float32)
    hi = np.asarray([b[1] for b in bounds], dtype=np.float32)
    span = hi - lo
    safe = np.where(span > 0, span, 1.0)
    out = np.clip((values - lo) / safe, 0.0, 1.0)
    return np.where(span > 0, out, 0.0).astype(np.float32)


# --- augmentation -------------------------------------------------------------


@dataclass(frozen=True)
class AugmentConfig:
    """Probabilities of each transform; 0 disables it. Standardization always runs."""

    p_brightness: float = 0.0
    brightness_delta: float = 0.15
    p_hflip: float = 0.0
    p_vflip: float = 0.0
    p_rot90: float = 0.0
    p_color_jitter: float = 0.0
    jitter_strength: float = 0.1
    p_salt_pepper: float = 0.0
    sp_fraction: float = 0.01
    p_gauss: float = 0.0
    gauss_sigma: float = 0.02
    p_cutout: float = 0.0
    cutout_frac: float = 0.25

    def __post_init__(self):
        for f_ in ("p_brightness", "p_hflip", "p_vflip", "p_rot90", "p_color_jitter",
                   "p_salt_pepper", "p_gauss", "p_cutout"):
            v = getattr(self, f_)
            if not 0.0 <= v <= 1.0:
                raise ArgumentError(f"{f_} must be a probability, got {v}")


def hflip(pixels: np.ndarray) -> np.ndarray:
    return pixels[:, ::-1, :]


def vflip(pixels: np.ndarray) -> np.ndarray:
    return pixels[::-1, :, :]


def cutout(pixels: np.ndarray, frac: float, rng: np.random.Generator) -> np.ndarray:
    """Zero one square hole covering ~frac of the image, fully inside it."""
    s = pixels.shape[0]
    side = max(1, int(round(s * np.sqrt(frac))))
    top = int(rng.integers(0, s - side + 1))
    left = int(rng.integers(0, s - side + 1))
    out = pixels.copy()
    out[top:top + side, left:left + side, :] = 0.0
    return out


def standardize(pixels: np.ndarray) -> np.ndarray:
    return ((pixels - IMAGENET_MEAN) / IMAGENET_STD).astype(np.float32)


def augment(pixels: np.ndarray, cfg: AugmentConfig, seed: int) -> np.ndarray:
    """Apply the enabled transforms in order, then channel-wise standardization.

    Input pixels are the stored [0,1] spectrogram; output is the standardized
    model input (no longer bounded to [0,1]).
    """
    rng = rng_from(seed, "augment")
    x = np.asarray(pixels, dtype=np.float32)

    if cfg.p_brightness and rng.random() < cfg.p_brightness:
        x = np.clip(x + rng.uniform(-cfg.brightness_delta, cfg.brightness_delta), 0.0, 1.0)
    if cfg.p_hflip and rng.random() < cfg.p_hflip:
        x = hflip(x)
    if cfg.p_vflip and rng.random() < cfg.p_vflip:
        x = vflip(x)
    if cfg.p_rot90 and rng.random() < cfg.p_rot90:
        x = np.rot90(x, k=int(rng.integers(1, 4)), axes=(0, 1))
    if cfg.p_color_jitter and rng.random() < cfg.p_color_jitter:
        s = cfg.jitter_strength
        scale = rng.uniform(1.0 - s, 1.0 + s, size=3).astype(np.float32)
        shift = rng.uniform(-s / 2, s / 2, size=3).astype(np.float32)
        x = np.clip(x * scale + shift, 0.0, 1.0)
    if cfg.p_salt_pepper and rng.random() < cfg.p_salt_pepper:
        h, w, _ = x.shape
        n = int(round(cfg.sp_fraction * h * w))
        rows = rng.integers(0, h, size=n)
        cols = rng.integers(0, w, size=n)
        vals = rng.integers(0, 2, size=n).astype(np.float32)
        x = x.copy()
        x[rows, cols, :] = vals[:, None]
    if cfg.p_gauss and rng.random() < cfg.p_gauss:
        x = np.clip(x + rng.normal(0.0, cfg.gauss_sigma, size=x.shape).astype(np.float32), 0.0, 1.0)
    if cfg.p_cutout and rng.random() < cfg.p_cutout:
        x = cutout(x, cfg.cutout_frac, rng)

    return standardize(np.ascontiguousarray(x))
