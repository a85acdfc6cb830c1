"""Waveform synthesis and spectrogram tests, checked against direct-DFT oracles."""

import numpy as np
import pytest

from jamlab.errors import ArgumentError, ShapeError
from jamlab.rfsynth import (
    ChannelConfig,
    IqWindow,
    JamSpec,
    Spectrogram,
    hann,
    mean_power,
    mix,
    render_spectrogram,
    stft_magnitudes,
    synth_benign,
    synth_jammer,
)

CFG = ChannelConfig(sample_rate_hz=1e6, window_ms=500.0)
SMALL = ChannelConfig(sample_rate_hz=0.2e6, window_ms=500.0)


def tone_spec(gain=20.0, sc=12, offset=2.5e6):
    return JamSpec(kind="single_tone", gain_db=gain, tone_subcarriers=sc, center_offset_hz=offset)


def pulse_spec(gain=20.0, sc=64, duty=0.5, pulse_ms=10.0, offset=0.0):
    return JamSpec(kind="pulsed", gain_db=gain, pulse_subcarriers=sc, duty_cycle=duty,
                   pulse_ms=pulse_ms, center_offset_hz=offset)


def wb_spec(gain=20.0, mhz=8.0, offset=0.0):
    return JamSpec(kind="wideband", gain_db=gain, wideband_mhz=mhz, center_offset_hz=offset)


# --- benign -----------------------------------------------------------------


def test_benign_band_power_oracle():
    iq = synth_benign(SMALL, occupancy=0.5, snr_db=60.0, seed=11)
    spec = np.fft.fftshift(np.fft.fft(iq.samples.astype(np.complex128)))
    p = np.abs(spec) ** 2
    n = len(p)
    central = p[n // 4: 3 * n // 4].sum()
    assert central / p.sum() >= 0.90


def test_benign_high_snr_power_is_signal_dominated():
    iq = synth_benign(SMALL, occupancy=1.0, snr_db=60.0, seed=3)
    # signal is unit power; at +60 dB SNR the noise adds < 1%
    assert mean_power(iq.samples) == pytest.approx(1.0, rel=0.01)


def test_benign_deterministic_in_seed():
    a = synth_benign(SMALL, occupancy=0.6, snr_db=20.0, seed=42)
    b = synth_benign(SMALL, occupancy=0.6, snr_db=20.0, seed=42)
    assert np.array_equal(a.samples, b.samples)
    c = synth_benign(SMALL, occupancy=0.6, snr_db=20.0, seed=43)
    assert not np.array_equal(a.samples, c.samples)


def test_benign_occupancy_validation():
    with pytest.raises(ArgumentError):
        synth_benign(SMALL, occupancy=0.0, snr_db=20.0, seed=1)


# --- jammers ----------------------------------------------------------------


def _avg_periodogram(x: np.ndarray, fft: int) -> np.ndarray:
    frames = x[: len(x) // fft * fft].reshape(-1, fft).astype(np.complex128)
    frames = frames * hann(fft)  # suppress rectangular-frame leakage
    return np.fft.fftshift(np.abs(np.fft.fft(frames, axis=1)) ** 2.0, axes=1).mean(axis=0)


def test_tone_peak_bin_matches_direct_dft():
    for fft in (256, 512):
        iq = synth_jammer(CFG, tone_spec(sc=12, offset=2.5e6), seed=5)
        p = _avg_periodogram(iq.samples, fft)
        expected = fft // 2 + round(2.5e6 / 20e6 * fft)
        assert int(np.argmax(p)) == expected


def test_pulsed_duty_cycle_oracle():
    iq = synth_jammer(CFG, pulse_spec(duty=0.5, pulse_ms=10.0), seed=9)
    active = np.abs(iq.samples) > 1e-6 * np.abs(iq.samples).max()
    frac = active.mean()
    assert frac == pytest.approx(0.50, abs=0.02)


def test_wideband_occupancy_oracle():
    iq = synth_jammer(CFG, wb_spec(mhz=8.0), seed=13)
    p = _avg_periodogram(iq.samples, 256)
    occupied = (p > p.max() / 1e3).mean()
    assert occupied == pytest.approx(8.0 / 20.0, abs=0.05)


def test_jammer_gain_monotonicity():
    for make in (tone_spec, pulse_spec, wb_spec):
        powers = [mean_power(synth_jammer(SMALL, make(gain=g), seed=7).samples) for g in (10, 20, 30)]
        assert powers[2] > powers[1] > powers[0]


def test_jamspec_validation():
    with pytest.raises(ArgumentError):
        JamSpec(kind="single_tone", gain_db=10.0)  # missing tone_subcarriers
    with pytest.raises(ArgumentError):
        JamSpec(kind="single_tone", gain_db=10.0, tone_subcarriers=12, duty_cycle=0.5)
    with pytest.raises(ArgumentError):
        JamSpec(kind="wideband", gain_db=-3.0, wideband_mhz=4.0)
    with pytest.raises(ArgumentError):
        JamSpec(kind="chirp", gain_db=10.0)


# --- mix ----------------------------------------------------------------------


def test_mix_none_is_identity():
    b = synth_benign(SMALL, occupancy=0.5, snr_db=20.0, seed=1)
    assert mix(b, None) is b


def test_mix_zero_benign_returns_jammer():
    j = synth_jammer(SMALL, tone_spec(), seed=2)
    zero = IqWindow.of(np.zeros_like(j.samples))
    np.testing.assert_array_equal(mix(zero, j).samples, j.samples)


def test_mix_power_additivity():
    b = synth_benign(SMALL, occupancy=0.6, snr_db=25.0, seed=21)
    j = synth_jammer(SMALL, wb_spec(gain=10.0), seed=22)
    out = mix(b, j)
    expected = mean_power(b.samples) + mean_power(j.samples)
    assert mean_power(out.samples) == pytest.approx(expected, rel=0.05)


def test_mix_length_mismatch():
    b = synth_benign(SMALL, occupancy=0.5, snr_db=20.0, seed=1)
    with pytest.raises(ShapeError):
        mix(b, IqWindow.of(np.zeros(10, dtype=np.complex64)))


# --- spectrogram rendering ----------------------------------------------------


def naive_windowed_dft(samples: np.ndarray, fft: int, hop: int) -> np.ndarray:
    """Per-frame DFT by explicit complex exponential matrix (float64)."""
    w = hann(fft).astype(np.float64)
    k = np.arange(fft)
    dft = np.exp(-2j * np.pi * np.outer(k, k) / fft)
    out = []
    for start in range(0, len(samples) - fft + 1, hop):
        frame = samples[start:start + fft].astype(np.complex128) * w
        out.append(np.abs(dft @ frame) / w.sum())
    return np.fft.fftshift(np.asarray(out), axes=1)


def test_stft_matches_naive_dft_oracle():
    for seed in range(5):
        rng = np.random.default_rng(seed)
        x = (rng.normal(size=2048) + 1j * rng.normal(size=2048)).astype(np.complex64)
        fast = stft_magnitudes(x, 256, 128)
        slow = naive_windowed_dft(x, 256, 128)
        assert fast.shape == slow.shape
        assert np.max(np.abs(fast.astype(np.float64) - slow)) < 1e-4


def test_render_all_zero_iq_is_uniform_zero():
    iq = IqWindow.of(np.zeros(4096, dtype=np.complex64))
    img = render_spectrogram(iq, 256, out_size=32).pixels
    assert img.shape == (32, 32, 3)
    assert np.all(img == 0.0)


def test_render_pure_tone_peaks_in_tone_column():
    iq = synth_jammer(CFG, tone_spec(sc=12, offset=2.5e6), seed=5)
    sp = render_spectrogram(iq, 256, out_size=64)
    img = sp.pixels[:, :, 0]
    assert img.max() == pytest.approx(1.0)
    # the tone's frequency fraction 0.125 above DC -> column near (0.5+0.125)*64
    col = int(np.argmax(img.max(axis=0)))
    assert abs(col - round(0.625 * 64)) <= 1


def test_render_paper_scale_shape():
    iq = synth_benign(SMALL, occupancy=0.5, snr_db=20.0, seed=8)
    sp = render_spectrogram(iq, 256, out_size=224)
    assert sp.pixels.shape == (224, 224, 3)


def test_render_pixels_in_unit_range_and_deterministic():
    iq = mix(
        synth_benign(SMALL, occupancy=0.7, snr_db=20.0, seed=31),
        synth_jammer(SMALL, pulse_spec(), seed=32),
    )
    a = render_spectrogram(iq, 512, out_size=64)
    b = render_spectrogram(iq, 512, out_size=64)
    assert np.all(a.pixels >= 0.0) and np.all(a.pixels <= 1.0)
    assert np.array_equal(a.pixels, b.pixels)
    assert a.fft_size == 512


def test_render_validation():
    iq = IqWindow.of(np.zeros(128, dtype=np.complex64))
    with pytest.raises(ArgumentError):
        render_spectrogram(iq, 256)  # shorter than fft
    with pytest.raises(ArgumentError):
        render_spectrogram(iq, 100)  # bad fft size
