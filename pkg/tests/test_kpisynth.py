"""KPI stream synthesis tests."""

import numpy as np
import pytest

from jamlab.errors import ArgumentError
from jamlab.kpisynth import (
    clean_bounds,
    fiveg_profile,
    profile_by_name,
    synth_kpi_stream,
    wifi_profile,
)
from jamlab.rfsynth import JamSpec

WIFI = wifi_profile()
FIVEG = fiveg_profile()

WB30 = JamSpec(kind="wideband", gain_db=30.0, wideband_mhz=8.0)
PULSE = JamSpec(kind="pulsed", gain_db=30.0, pulse_subcarriers=72, duty_cycle=0.5, pulse_ms=10.0)


def test_profile_channel_counts_and_cadence():
    assert WIFI.n_channels == 18 and WIFI.nominal_dt_ms == 5.0
    assert FIVEG.n_channels == 6 and FIVEG.nominal_dt_ms == 1.0
    assert profile_by_name("wifi").name == "wifi"
    with pytest.raises(ArgumentError):
        profile_by_name("lte")


def test_clean_streams_stay_inside_range_plus_3_sigma():
    total, inside = 0, 0
    for seed in range(100):
        s = synth_kpi_stream(WIFI, None, 0.0, seed=seed)
        for ch, t, v in zip(WIFI.channels, s.timestamps, s.values):
            lo = ch.clean_lo - 3 * ch.noise_sigma
            hi = ch.clean_hi + 3 * ch.noise_sigma
            inside += int(((v >= lo) & (v <= hi)).sum())
            total += len(v)
    assert inside / total >= 0.99


def test_wideband_drops_mean_snr_vs_clean():
    i = WIFI.channel_index("dl_snr")
    clean = synth_kpi_stream(WIFI, None, 0.0, seed=5)
    jammed = synth_kpi_stream(WIFI, WB30, 30.0, seed=5)
    assert jammed.values[i].mean() < clean.values[i].mean()


def test_pulsed_loss_channel_alternates_at_duty_fraction():
    i = WIFI.channel_index("packet_loss")
    s = synth_kpi_stream(WIFI, PULSE, 30.0, seed=8)
    clean = synth_kpi_stream(WIFI, None, 0.0, seed=8)
    v = s.values[i]
    thresh = 0.5 * (clean.values[i].mean() + v.max())
    elevated = v > thresh
    assert elevated.mean() == pytest.approx(0.5, abs=0.1)
    # alternating segments, not one block: several switches
    assert int(np.abs(np.diff(elevated.astype(int))).sum()) >= 10


def test_determinism():
    for jam in (None, WB30, PULSE):
        g = 0.0 if jam is None else jam.gain_db
        a = synth_kpi_stream(WIFI, jam, g, seed=77)
        b = synth_kpi_stream(WIFI, jam, g, seed=77)
        for x, y in zip(a.values, b.values):
            assert np.array_equal(x, y)
        for x, y in zip(a.timestamps, b.timestamps):
            assert np.array_equal(x, y)


def test_timestamps_strictly_increasing_and_count():
    for prof in (WIFI, FIVEG):
        s = synth_kpi_stream(prof, None, 0.0, seed=13)
        nominal = 500.0 / prof.nominal_dt_ms
        for t in s.timestamps:
            assert np.all(np.diff(t) > 0)
            assert np.all((t >= 0) & (t < 500.0))
            assert abs(len(t) - nominal) <= 0.1 * nominal


def test_degradation_monotone_in_gain():
    i = WIFI.channel_index("dl_snr")
    means = []
    for g in (10.0, 20.0, 30.0):
        jam = JamSpec(kind="wideband", gain_db=g, wideband_mhz=4.0)
        means.append(synth_kpi_stream(WIFI, jam, g, seed=4).values[i].mean())
    assert means[0] >= means[1] >= means[2]


# --- clean_bounds -------------------------------------------------------------


def _const_stream(value: float):
    from jamlab.kpisynth import KpiSampleStream

    t = np.arange(0.0, 500.0, 5.0)
    return KpiSampleStream([t] * 18, [np.full_like(t, value, dtype=np.float32)] * 18,
                           tuple(c.name for c in WIFI.channels), 500.0)


def test_clean_bounds_degenerate_constant():
    b = clean_bounds(WIFI, [_const_stream(7.0)])
    assert all(lo == 7.0 and hi == 7.0 for lo, hi in b)


def test_clean_bounds_envelope():
    b = clean_bounds(WIFI, [_const_stream(0.0), _const_stream(4.0), _const_stream(9.0)])
    assert all((lo, hi) == (0.0, 9.0) for lo, hi in b)


def test_clean_bounds_empty_rejected():
    with pytest.raises(ArgumentError):
        clean_bounds(WIFI, [])


def test_bounds_differ_between_benign_only_and_full_scenarios():
    i = WIFI.channel_index("dl_snr")
    benign = [synth_kpi_stream(WIFI, None, 0.0, seed=s) for s in range(10)]
    full = benign + [synth_kpi_stream(WIFI, WB30, 30.0, seed=100 + s) for s in range(10)]
    b_benign = clean_bounds(WIFI, benign)[i]
    b_full = clean_bounds(WIFI, full)[i]
    assert b_full[0] < b_benign[0]  # jamming drags the SNR minimum down
