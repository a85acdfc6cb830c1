"""Seeded complex-baseband synthesis and spectrogram rendering.

Conventions:
  * Benign traffic is normalized to unit average signal power; jammer power is
    expressed relative to that anchor, so a gain of G dB means the jammer's
    (active-period) power is 10^(G/10).
  * Jammer frequencies are stated on the nominal channel grid (20 MHz wide,
    1200 notional subcarriers). At lower simulation sample rates the band plan
    scales proportionally, which preserves every relative-bandwidth feature a
    classifier can see.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.fft

from .errors import ArgumentError, ShapeError
from .seeding import rng_from

JAM_KINDS = ("single_tone", "pulsed", "wideband")


@dataclass(frozen=True)
class ChannelConfig:
    sample_rate_hz: float = 20e6
    window_ms: float = 500.0
    num_subcarriers: int = 1200
    noise_floor_dbfs: float = -80.0
    nominal_bandwidth_hz: float = 20e6

    def __post_init__(self):
        if self.sample_rate_hz <= 0 or self.window_ms <= 0:
            raise ArgumentError("sample_rate_hz and window_ms must be positive")
        if self.num_subcarriers < 8:
            raise ArgumentError("num_subcarriers too small to form a band plan")

    @property
    def n_samples(self) -> int:
        return int(round(self.sample_rate_hz * self.window_ms / 1000.0))

    def freq_fraction(self, nominal_hz: float) -> float:
        """Map a nominal-channel frequency to a fraction of the sampled band."""
        return nominal_hz / self.nominal_bandwidth_hz


@dataclass(frozen=True)
class JamSpec:
    """One jamming waveform. Only the fields relevant to `kind` may be set."""

    kind: str
    gain_db: float
    tone_subcarriers: Optional[int] = None      # single_tone: contiguous set width, 12..36
    pulse_subcarriers: Optional[int] = None     # pulsed: contiguous set width, 48..96
    duty_cycle: Optional[float] = None          # pulsed: fraction of time on, (0, 1]
    pulse_ms: Optional[float] = None            # pulsed: on-pulse duration, 5..20 ms
    wideband_mhz: Optional[float] = None        # wideband: nominal bandwidth, {1,2,4,8}
    center_offset_hz: float = 0.0               # nominal offset of the jammed band from DC

    def __post_init__(self):
        if self.kind not in JAM_KINDS:
            raise ArgumentError(f"unknown jammer kind {self.kind!r}; expected one of {JAM_KINDS}")
        if self.gain_db <= 0:
            raise ArgumentError(f"gain_db must be positive, got {self.gain_db}")
        needed = {
            "single_tone": ("tone_subcarriers",),
            "pulsed": ("pulse_subcarriers", "duty_cycle", "pulse_ms"),
            "wideband": ("wideband_mhz",),
        }[self.kind]
        all_optional = ("tone_subcarriers", "pulse_subcarriers", "duty_cycle", "pulse_ms", "wideband_mhz")
        for f_ in needed:
            if getattr(self, f_) is None:
                raise ArgumentError(f"{self.kind} jammer requires {f_}")
        for f_ in all_optional:
            if f_ not in needed and getattr(self, f_) is not None:
                raise ArgumentError(f"{f_} is not a {self.kind} parameter")
        if self.kind == "pulsed" and not 0 < self.duty_cycle <= 1:
            raise ArgumentError(f"duty_cycle must be in (0, 1], got {self.duty_cycle}")

    def occupied_fraction(self, cfg: ChannelConfig) -> float:
        """Fraction of the nominal channel the jammer occupies."""
        if self.kind == "single_tone":
            return self.tone_subcarriers / cfg.num_subcarriers
        if self.kind == "pulsed":
            return self.pulse_subcarriers / cfg.num_subcarriers
        return self.wideband_mhz * 1e6 / cfg.nominal_bandwidth_hz


@dataclass
class IqWindow:
    """Complex-baseband samples for one observation window."""

    samples: np.ndarray
    rms_power: float

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.complex64)
        if not np.all(np.isfinite(self.samples.view(np.float32))):
            raise ArgumentError("non-finite IQ samples")

    @classmethod
    def of(cls, samples: np.ndarray) -> "IqWindow":
        samples = np.asarray(samples, dtype=np.complex64)
        return cls(samples=samples, rms_power=float(np.sqrt(mean_power(samples))))


@dataclass
class Spectrogram:
    """S x S x 3 image of log-magnitude spectral activity, values in [0, 1]."""

    pixels: np.ndarray
    fft_size: int
    window_index: int = -1

    def __post_init__(self):
        self.pixels = np.asarray(self.pixels, dtype=np.float32)
        if self.pixels.ndim != 3 or self.pixels.shape[2] != 3:
            raise ShapeError(f"spectrogram must be SxSx3, got {self.pixels.shape}")


def mean_power(x: np.ndarray) -> float:
    return float(np.mean(np.abs(x) ** 2)) if x.size else 0.0


def _ofdm_band(cfg: ChannelConfig, width_sc: int, center_sc: int, fill, n_samples: int) -> np.ndarray:
    """Time-domain signal with energy on `width_sc` contiguous subcarriers.

    `fill(n_sym, width)` produces the per-symbol complex spectrum values.
    Symbols are back-to-back IFFT blocks of num_subcarriers samples.
    """
    n_sc = cfg.num_subcarriers
    n_sym = int(np.ceil(n_samples / n_sc))
    lo = center_sc - width_sc // 2
    idx = (np.arange(lo, lo + width_sc)) % n_sc  # subcarrier index, DC at 0, negatives wrap
    grid = np.zeros((n_sym, n_sc), dtype=np.complex64)
    grid[:, idx] = fill(n_sym, width_sc)
    x = scipy.fft.ifft(grid, axis=1, norm="forward") * n_sc
    return x.reshape(-1)[:n_samples].astype(np.complex64)


def synth_benign(cfg: ChannelConfig, occupancy: float, snr_db: float, seed: int) -> IqWindow:
    """OFDM-like benign traffic: random QPSK on a centered contiguous band + AWGN.

    The QPSK component is scaled to unit average power before noise is added,
    making it the power anchor for jammer gains.
    """
    if not 0 < occupancy <= 1:
        raise ArgumentError(f"occupancy must be in (0, 1], got {occupancy}")
    rng = rng_from(seed, "benign")
    n = cfg.n_samples
    width = max(1, int(round(occupancy * cfg.num_subcarriers)))

    def fill(n_sym, w):
        sym = rng.integers(0, 4, size=(n_sym, w))
        return np.exp(1j * (np.pi / 4 + np.pi / 2 * sym)).astype(np.complex64)

    sig = _ofdm_band(cfg, width, 0, fill, n)
    sig /= np.sqrt(mean_power(sig)) or 1.0
    npow = 10.0 ** (-snr_db / 10.0)
    noise = rng.normal(scale=np.sqrt(npow / 2), size=(n, 2)).astype(np.float32)
    return IqWindow.of(sig + noise[:, 0] + 1j * noise[:, 1])


def synth_jammer(cfg: ChannelConfig, spec: JamSpec, seed: int) -> IqWindow:
    """Render one jamming waveform at its configured relative power."""
    rng = rng_from(seed, "jam", spec.kind)
    n = cfg.n_samples
    target = 10.0 ** (spec.gain_db / 10.0)
    center_sc = int(round(cfg.freq_fraction(spec.center_offset_hz) * cfg.num_subcarriers))

    if spec.kind == "single_tone":
        # constant spectrum across symbols = phase-continuous complex exponentials
        w = spec.tone_subcarriers
        taper = (0.6 + 0.4 * np.cos(np.linspace(-np.pi / 2, np.pi / 2, w))).astype(np.float32)
        phases = np.exp(1j * rng.uniform(0, 2 * np.pi, size=w)).astype(np.complex64)
        x = _ofdm_band(cfg, w, center_sc, lambda s, ww: np.broadcast_to(taper * phases, (s, ww)), n)
        x *= np.sqrt(target / mean_power(x))
        return IqWindow.of(x)

    if spec.kind == "pulsed":
        def fill(n_sym, w):
            sym = rng.integers(0, 4, size=(n_sym, w))
            return np.exp(1j * (np.pi / 4 + np.pi / 2 * sym)).astype(np.complex64)

        x = _ofdm_band(cfg, spec.pulse_subcarriers, center_sc, fill, n)
        period_ms = spec.pulse_ms / spec.duty_cycle
        t_ms = np.arange(n) * (1000.0 / cfg.sample_rate_hz)
        phase_ms = rng.uniform(0, period_ms)
        env = ((t_ms + phase_ms) % period_ms) < spec.pulse_ms
        x *= env
        active = mean_power(x[env]) if env.any() else 1.0
        x *= np.sqrt(target / active)  # gain is the ON-period (transmit) power
        return IqWindow.of(x)

    # wideband AWGN, band-limited by construction in the frequency domain
    bw_frac = cfg.freq_fraction(spec.wideband_mhz * 1e6)
    c_frac = cfg.freq_fraction(spec.center_offset_hz)
    freqs = np.fft.fftfreq(n)  # cycles/sample in [-0.5, 0.5)
    band = np.abs(freqs - c_frac) <= bw_frac / 2
    spec_bins = np.zeros(n, dtype=np.complex64)
    vals = rng.normal(size=(int(band.sum()), 2))
    spec_bins[band] = vals[:, 0] + 1j * vals[:, 1]
    x = scipy.fft.ifft(spec_bins, norm="forward").astype(np.complex64)
    x *= np.sqrt(target / mean_power(x))
    return IqWindow.of(x)


def mix(benign: IqWindow, jammer: Optional[IqWindow]) -> IqWindow:
    """Superpose a jammer onto benign traffic (None leaves benign untouched)."""
    if jammer is None:
        return benign
    if benign.samples.shape != jammer.samples.shape:
        raise ShapeError(f"length mismatch: {benign.samples.shape} vs {jammer.samples.shape}")
    return IqWindow.of(benign.samples + jammer.samples)


def hann(n: int) -> np.ndarray:
    """Periodic Hann window."""
    return (0.5 - 0.5 * np.cos(2 * np.pi * np.arange(n) / n)).astype(np.float32)


def stft_magnitudes(samples: np.ndarray, fft_size: int, hop: int) -> np.ndarray:
    """Hann-windowed, center-shifted magnitude STFT, normalized by window sum."""
    frames = np.lib.stride_tricks.sliding_window_view(samples, fft_size)[::hop]
    win = hann(fft_size)
    spec = scipy.fft.fft(frames * win, axis=1)
    return (np.abs(np.fft.fftshift(spec, axes=1)) / win.sum()).astype(np.float32)


def _lin_resample(a: np.ndarray, m: int, axis: int) -> np.ndarray:
    """Linear (align-corners) resample of one axis to length m."""
    n = a.shape[axis]
    if n == m:
        return a
    pos = np.linspace(0.0, n - 1.0, m)
    lo = np.floor(pos).astype(np.int64)
    hi = np.minimum(lo + 1, n - 1)
    w = (pos - lo).astype(a.dtype)
    shape = [1] * a.ndim
    shape[axis] = m
    w = w.reshape(shape)
    return np.take(a, lo, axis=axis) * (1 - w) + np.take(a, hi, axis=axis) * w


def bilinear_resize(a: np.ndarray, rows: int, cols: int) -> np.ndarray:
    return _lin_resample(_lin_resample(a, rows, 0), cols, 1)


def render_spectrogram(
    iq: IqWindow,
    fft_size: int,
    hop: Optional[int] = None,
    out_size: int = 64,
    noise_floor_dbfs: float = -80.0,
    window_index: int = -1,
) -> Spectrogram:
    """Waterfall image: rows are time, columns are center-shifted frequency.

    Log magnitudes are clipped to [noise floor, peak], min-max scaled to [0, 1],
    bilinearly resampled to out_size x out_size and replicated to 3 channels.
    """
    if fft_size not in (256, 512, 1024):
        raise ArgumentError(f"fft_size must be one of 256/512/1024, got {fft_size}")
    if len(iq.samples) < fft_size:
        raise ArgumentError(f"window of {len(iq.samples)} samples is shorter than fft_size {fft_size}")
    hop = fft_size // 2 if hop is None else hop
    if hop < 1:
        raise ArgumentError(f"hop must be >= 1, got {hop}")
    mag = stft_magnitudes(iq.samples, fft_size, hop)
    db = 20.0 * np.log10(mag + 1e-12)
    db = np.clip(db, noise_floor_dbfs, None)

    def unit_scale(a):
        span = a.max() - a.min()
        return (a - a.min()) / span if span > 0 else np.zeros_like(a)

    img = bilinear_resize(unit_scale(db), out_size, out_size)
    img = unit_scale(img)  # re-anchor after interpolation so the peak stays exactly 1
    pixels = np.repeat(img[:, :, None], 3, axis=2).astype(np.float32)
    return Spectrogram(pixels=np.clip(pixels, 0.0, 1.0), fft_size=fft_size, window_index=window_index)
