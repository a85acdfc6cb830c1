"""Seeded cross-layer KPI stream synthesis.

Each channel follows a stationary AR(1) baseline inside its clean range. While
a jammer is active, an effective-SINR penalty (growing with jammer gain and
spectral overlap) pulls dependent channels away from baseline through a
first-order lag, so throughput-like channels sag and error-like channels rise,
slightly delayed — the cross-layer signature the KPI encoder feeds on.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.signal

from .errors import ArgumentError
from .rfsynth import JamSpec
from .seeding import rng_from

AR1_PHI = 0.9
OVERLAP_EXPONENT = 0.25  # sublinear coupling: narrow jammers still leave a mark


@dataclass(frozen=True)
class KpiChannel:
    name: str
    unit: str
    clean_lo: float
    clean_hi: float
    noise_sigma: float

    @property
    def center(self) -> float:
        return 0.5 * (self.clean_lo + self.clean_hi)


@dataclass(frozen=True)
class ChannelResponse:
    """How one channel reacts to an SINR penalty (in dB).

    slope is signed: positive channels rise under jamming (losses, retries),
    negative ones fall (SNR, rates). |effect| is capped at saturation and the
    channel approaches its target with a first-order lag.
    """

    slope: float
    saturation: float
    lag_ms: float


@dataclass(frozen=True)
class DegradationModel:
    responses: tuple[ChannelResponse, ...]


@dataclass(frozen=True)
class KpiProfile:
    name: str
    channels: tuple[KpiChannel, ...]
    nominal_dt_ms: float
    jitter_sigma_ms: float
    degradation: DegradationModel

    def __post_init__(self):
        if self.nominal_dt_ms <= 0:
            raise ArgumentError("nominal_dt_ms must be positive")
        if len(self.degradation.responses) != len(self.channels):
            raise ArgumentError("degradation model must cover every channel")

    @property
    def n_channels(self) -> int:
        return len(self.channels)

    def channel_index(self, name: str) -> int:
        for i, c in enumerate(self.channels):
            if c.name == name:
                return i
        raise KeyError(name)


@dataclass
class KpiSampleStream:
    """Per-channel (timestamp_ms, value) samples within one window."""

    timestamps: list[np.ndarray]
    values: list[np.ndarray]
    channel_names: tuple[str, ...]
    window_ms: float


def _ch(name, unit, lo, hi, sigma, slope, sat, lag):
    return KpiChannel(name, unit, lo, hi, sigma), ChannelResponse(slope, sat, lag)


_WIFI_TABLE = [
    _ch("tx_failures", "pkt/s", 0.0, 4.0, 1.0, 1.2, 40.0, 8.0),
    _ch("tx_retry_exhausted", "pkt/s", 0.0, 2.0, 0.5, 0.6, 25.0, 10.0),
    _ch("tx_total_packets", "pkt/s", 900.0, 1100.0, 50.0, -18.0, 600.0, 15.0),
    _ch("tx_total_packets_sent", "pkt/s", 880.0, 1080.0, 50.0, -18.0, 600.0, 15.0),
    _ch("tx_data_packets_retried", "pkt/s", 10.0, 30.0, 5.0, 6.0, 250.0, 8.0),
    _ch("tx_packets_retries", "pkt/s", 20.0, 60.0, 10.0, 8.0, 300.0, 8.0),
    _ch("tx_total_bytes", "kB/s", 1100.0, 1300.0, 50.0, -20.0, 800.0, 15.0),
    _ch("rx_data_packets", "pkt/s", 900.0, 1100.0, 50.0, -16.0, 600.0, 12.0),
    _ch("rx_total_packets_retried", "pkt/s", 10.0, 30.0, 5.0, 6.0, 250.0, 8.0),
    _ch("rx_data_bytes", "kB/s", 1100.0, 1300.0, 50.0, -18.0, 800.0, 12.0),
    _ch("rssi", "dBm", -52.0, -48.0, 1.0, 0.35, 12.0, 5.0),
    _ch("noise_floor", "dBm", -96.0, -92.0, 1.0, 1.6, 45.0, 3.0),
    _ch("dl_snr", "dB", 26.0, 30.0, 1.0, -1.0, 26.0, 5.0),
    _ch("tx_rate_last_min", "Mbps", 40.0, 60.0, 5.0, -2.2, 50.0, 12.0),
    _ch("tx_rate_last_max", "Mbps", 120.0, 140.0, 5.0, -3.0, 110.0, 12.0),
    _ch("rtt_server", "ms", 8.0, 12.0, 1.0, 1.4, 60.0, 10.0),
    _ch("jitter", "ms", 1.0, 3.0, 0.5, 0.9, 30.0, 6.0),
    _ch("packet_loss", "%", 0.0, 1.0, 0.25, 1.8, 60.0, 2.0),
]

_FIVEG_TABLE = [
    _ch("rsrp", "dBm", -82.0, -78.0, 1.0, -0.3, 10.0, 5.0),
    _ch("dl_snr", "dB", 24.0, 28.0, 1.0, -1.0, 24.0, 4.0),
    _ch("dl_bler", "%", 0.0, 2.0, 0.5, 2.2, 70.0, 2.0),
    _ch("dl_mcs", "index", 24.0, 28.0, 1.0, -0.8, 22.0, 6.0),
    _ch("cqi", "index", 12.0, 15.0, 0.8, -0.45, 11.0, 6.0),
    _ch("ul_buffer", "kB", 5.0, 15.0, 3.0, 3.0, 200.0, 10.0),
]


def wifi_profile() -> KpiProfile:
    """18-channel NIC/probe profile sampled every 5 ms."""
    chans, resps = zip(*_WIFI_TABLE)
    return KpiProfile("wifi", chans, nominal_dt_ms=5.0, jitter_sigma_ms=0.6,
                      degradation=DegradationModel(resps))


def fiveg_profile() -> KpiProfile:
    """6-channel modem profile sampled every 1 ms."""
    chans, resps = zip(*_FIVEG_TABLE)
    return KpiProfile("fiveg", chans, nominal_dt_ms=1.0, jitter_sigma_ms=0.15,
                      degradation=DegradationModel(resps))


def profile_by_name(name: str) -> KpiProfile:
    if name == "wifi":
        return wifi_profile()
    if name == "fiveg":
        return fiveg_profile()
    raise ArgumentError(f"unknown KPI profile {name!r}")


def sinr_penalty_db(jam: Optional[JamSpec], gain_db: float, benign_occupancy: float,
                    num_subcarriers: int = 1200, nominal_bandwidth_hz: float = 20e6) -> float:
    """Effective SINR drop while the jammer is on."""
    if jam is None:
        return 0.0
    if jam.kind == "single_tone":
        jam_frac = jam.tone_subcarriers / num_subcarriers
    elif jam.kind == "pulsed":
        jam_frac = jam.pulse_subcarriers / num_subcarriers
    else:
        jam_frac = jam.wideband_mhz * 1e6 / nominal_bandwidth_hz
    overlap = min(max(jam_frac / max(benign_occupancy, 1e-6), 0.0), 1.0)
    return gain_db * overlap ** OVERLAP_EXPONENT


def _ar1(rng: np.random.Generator, n: int, sigma: float) -> np.ndarray:
    innov = rng.normal(size=n) * sigma * np.sqrt(1.0 - AR1_PHI**2)
    innov[0] = rng.normal() * sigma  # start at the stationary distribution
    return scipy.signal.lfilter([1.0], [1.0, -AR1_PHI], innov)


def synth_kpi_stream(
    profile: KpiProfile,
    jam: Optional[JamSpec],
    gain_db: float,
    seed: int,
    window_ms: float = 500.0,
    benign_occupancy: float = 0.6,
) -> KpiSampleStream:
    """Generate one window of irregularly sampled KPI values for every channel."""
    penalty = sinr_penalty_db(jam, gain_db, benign_occupancy)
    times, values = [], []
    for i, (chan, resp) in enumerate(zip(profile.channels, profile.degradation.responses)):
        rng = rng_from(seed, "kpi", profile.name, i)
        m = int(round(window_ms / profile.nominal_dt_ms))
        t = np.arange(m) * profile.nominal_dt_ms + rng.normal(0.0, profile.jitter_sigma_ms, size=m)
        t = np.sort(t) + np.arange(m) * 1e-7  # strictly increasing after jitter
        keep = (t >= 0.0) & (t < window_ms)
        t = t[keep]
        base = chan.center + _ar1(rng, m, chan.noise_sigma)[keep]

        if jam is None or penalty == 0.0:
            v = base
        else:
            if jam.kind == "pulsed":
                period = jam.pulse_ms / jam.duty_cycle
                phase = rng.uniform(0.0, period)
                active = ((t + phase) % period) < jam.pulse_ms
            else:
                active = np.ones_like(t, dtype=bool)
            target = resp.slope * penalty * active
            alpha = float(np.exp(-profile.nominal_dt_ms / resp.lag_ms))
            effect = scipy.signal.lfilter([1.0 - alpha], [1.0, -alpha], target)
            effect = np.clip(effect, -resp.saturation, resp.saturation)
            v = base + effect

        times.append(t.astype(np.float64))
        values.append(v.astype(np.float32))
    return KpiSampleStream(times, values, tuple(c.name for c in profile.channels), window_ms)


def clean_bounds(profile: KpiProfile, streams: list[KpiSampleStream]) -> list[tuple[float, float]]:
    """Channel-wise global (min, max) over a dataset of streams."""
    if not streams:
        raise ArgumentError("clean_bounds needs a nonempty dataset")
    bounds = []
    for i in range(profile.n_channels):
        lo = min(float(s.values[i].min()) for s in streams)
        hi = max(float(s.values[i].max()) for s in streams)
        bounds.append((lo, hi))
    return bounds
