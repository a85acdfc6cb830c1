"""Scenario-grid dataset assembly, stratified split, client partitioning.

On disk a dataset is one manifest.json plus a samples/ directory of FJB1
blobs. Stored spectrograms keep their [0,1] pixels; stored KPI windows are the
raw downsampled grids, normalized at load time with the manifest's frozen
min-max bounds.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .. import blobio
from ..errors import ArgumentError, IoError, PartitionError
from ..kpisynth import profile_by_name, synth_kpi_stream
from ..rfsynth import ChannelConfig, JamSpec, mix, render_spectrogram, synth_benign, synth_jammer
from ..seeding import derive_seed, rng_from
from .transforms import KpiWindow, align, atd_downsample, interpolate_uniform

CLASS_NAMES = ("benign", "single_tone", "pulsed", "wideband")
DEFAULT_FFTS = (256, 512, 1024)
DEFAULT_GAINS = (10.0, 20.0, 30.0)


@dataclass(frozen=True)
class GridCell:
    label: int
    gain_db: Optional[float]
    fft_size: int
    count: int


def build_grid(
    scale: float = 1.0,
    ffts: tuple[int, ...] = DEFAULT_FFTS,
    gains: tuple[float, ...] = DEFAULT_GAINS,
    per_class: int = 9000,
) -> list[GridCell]:
    """Scenario grid with the reference cell ratios at the requested scale.

    Reference shape: per class, benign splits evenly over FFTs and each jam
    class splits evenly over (gain, fft) cells. Fractional scales distribute
    remainders to the earliest cells so totals stay exact.
    """
    total = int(round(per_class * scale))
    if total < 1:
        raise ArgumentError(f"scale {scale} yields no samples per class")

    def spread(n_cells: int) -> list[int]:
        base, rem = divmod(total, n_cells)
        return [base + (1 if i < rem else 0) for i in range(n_cells)]

    cells = []
    for cnt, fft in zip(spread(len(ffts)), ffts):
        cells.append(GridCell(0, None, fft, cnt))
    for label in (1, 2, 3):
        combos = list(itertools.product(gains, ffts))
        for cnt, (gain, fft) in zip(spread(len(combos)), combos):
            cells.append(GridCell(label, gain, fft, cnt))
    return cells


@dataclass(frozen=True)
class GenSpec:
    """Everything assembly needs, resolved from the experiment config."""

    master_seed: int
    channel: ChannelConfig
    profile_name: str = "wifi"
    image_size: int = 64
    grid_len: int = 512
    kpi_len: int = 256
    atd_method: str = "stride"
    occupancy_range: tuple[float, float] = (0.45, 0.75)
    snr_range_db: tuple[float, float] = (18.0, 28.0)
    tone_subcarriers: tuple[int, int] = (12, 36)
    pulse_subcarriers: tuple[int, int] = (48, 96)
    duty_range: tuple[float, float] = (0.3, 0.7)
    pulse_ms_range: tuple[float, float] = (5.0, 20.0)
    wideband_mhz_choices: tuple[float, ...] = (1.0, 2.0, 4.0, 8.0)
    center_offset_frac: float = 0.3  # jam band center drawn within +-frac of nominal bw


def sample_jam_spec(gen: GenSpec, label: int, gain_db: float, rng: np.random.Generator) -> JamSpec:
    """Draw one jammer configuration inside the configured scenario ranges."""
    nominal = gen.channel.nominal_bandwidth_hz
    offset = float(rng.uniform(-gen.center_offset_frac, gen.center_offset_frac) * nominal)
    if label == 1:
        return JamSpec(kind="single_tone", gain_db=gain_db, center_offset_hz=offset,
                       tone_subcarriers=int(rng.integers(gen.tone_subcarriers[0], gen.tone_subcarriers[1] + 1)))
    if label == 2:
        return JamSpec(kind="pulsed", gain_db=gain_db, center_offset_hz=offset,
                       pulse_subcarriers=int(rng.integers(gen.pulse_subcarriers[0], gen.pulse_subcarriers[1] + 1)),
                       duty_cycle=float(rng.uniform(*gen.duty_range)),
                       pulse_ms=float(rng.uniform(*gen.pulse_ms_range)))
    if label == 3:
        return JamSpec(kind="wideband", gain_db=gain_db, center_offset_hz=offset,
                       wideband_mhz=float(rng.choice(gen.wideband_mhz_choices)))
    raise ArgumentError(f"label {label} has no jammer")


def synth_window(gen: GenSpec, cell: GridCell, window_index: int):
    """Generate one aligned (spectrogram pixels, kpi values) pair."""
    rng = rng_from(gen.master_seed, "scenario", window_index)
    occupancy = float(rng.uniform(*gen.occupancy_range))
    snr_db = float(rng.uniform(*gen.snr_range_db))
    benign = synth_benign(gen.channel, occupancy, snr_db, seed=derive_seed(gen.master_seed, "rf", window_index))
    jam = None
    if cell.label != 0:
        jam = sample_jam_spec(gen, cell.label, cell.gain_db, rng)
        jammer = synth_jammer(gen.channel, jam, seed=derive_seed(gen.master_seed, "rfjam", window_index))
        iq = mix(benign, jammer)
    else:
        iq = benign
    spec = render_spectrogram(iq, cell.fft_size, out_size=gen.image_size,
                              noise_floor_dbfs=gen.channel.noise_floor_dbfs, window_index=window_index)
    profile = profile_by_name(gen.profile_name)
    stream = synth_kpi_stream(profile, jam, 0.0 if jam is None else cell.gain_db,
                              seed=derive_seed(gen.master_seed, "kpi", window_index),
                              window_ms=gen.channel.window_ms, benign_occupancy=occupancy)
    grid = interpolate_uniform(stream, gen.grid_len, gen.channel.window_ms)
    kvals = atd_downsample(grid, gen.kpi_len, gen.atd_method)
    kpi = KpiWindow(values=kvals, grid_dt_ms=gen.channel.window_ms / gen.grid_len, window_index=window_index)
    align(spec, kpi)
    return spec, kpi


@dataclass
class DatasetManifest:
    version: int
    seeds: dict
    grid: list[dict]
    bounds: list[tuple[float, float]]
    records: list[dict]
    counts: dict
    meta: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "kind": "dataset",
            "version": self.version,
            "seeds": self.seeds,
            "grid": self.grid,
            "bounds": [list(b) for b in self.bounds],
            "records": self.records,
            "counts": self.counts,
            "meta": self.meta,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "DatasetManifest":
        if obj.get("kind") != "dataset":
            raise IoError("not a dataset manifest")
        return cls(version=obj["version"], seeds=obj["seeds"], grid=obj["grid"],
                   bounds=[tuple(b) for b in obj["bounds"]], records=obj["records"],
                   counts=obj["counts"], meta=obj.get("meta", {}))

    def ids_for(self, split: str) -> list[int]:
        return [r["id"] for r in self.records if r["split"] == split]


def assemble_dataset(gen: GenSpec, cells: list[GridCell], out_dir: Path,
                     train_frac: float = 0.8, meta: Optional[dict] = None) -> DatasetManifest:
    """Generate every grid cell, write blobs, split, freeze bounds, write manifest."""
    out_dir = Path(out_dir)
    samples_dir = out_dir / "samples"
    samples_dir.mkdir(parents=True, exist_ok=True)

    records: list[dict] = []
    ch_min = None
    ch_max = None
    extremes = []  # per-record channel min/max for bound computation after split
    widx = 0
    for cell in cells:
        for _ in range(cell.count):
            spec, kpi = synth_window(gen, cell, widx)
            spec_path = f"samples/w{widx:06d}_spec.fjb"
            kpi_path = f"samples/w{widx:06d}_kpi.fjb"
            blobio.write_blob(out_dir / spec_path, spec.pixels)
            blobio.write_blob(out_dir / kpi_path, kpi.values)
            records.append({
                "id": widx,
                "label": cell.label,
                "fft": cell.fft_size,
                "gain": cell.gain_db,
                "spec_path": spec_path,
                "kpi_path": kpi_path,
                "split": None,
            })
            extremes.append((kpi.values.min(axis=0), kpi.values.max(axis=0)))
            widx += 1

    split(records, train_frac=train_frac, seed=derive_seed(gen.master_seed, "split"))

    n_ch = extremes[0][0].shape[0]
    ch_min = np.full(n_ch, np.inf)
    ch_max = np.full(n_ch, -np.inf)
    for rec, (lo, hi) in zip(records, extremes):
        if rec["split"] == "train":
            ch_min = np.minimum(ch_min, lo)
            ch_max = np.maximum(ch_max, hi)
    bounds = [(float(lo), float(hi)) for lo, hi in zip(ch_min, ch_max)]

    counts: dict = {}
    for rec in records:
        key = f"{CLASS_NAMES[rec['label']]}/g{rec['gain']}/fft{rec['fft']}"
        counts[key] = counts.get(key, 0) + 1

    manifest = DatasetManifest(
        version=1,
        seeds={"master": gen.master_seed},
        grid=[{"label": c.label, "gain": c.gain_db, "fft": c.fft_size, "count": c.count} for c in cells],
        bounds=bounds,
        records=records,
        counts=counts,
        meta=dict(meta or {}, profile=gen.profile_name, image_size=gen.image_size,
                  kpi_len=gen.kpi_len, grid_len=gen.grid_len, atd_method=gen.atd_method,
                  sample_rate_hz=gen.channel.sample_rate_hz, window_ms=gen.channel.window_ms),
    )
    blobio.dump_json(out_dir / "manifest.json", manifest.to_json())
    return manifest


def load_manifest(path: Path) -> DatasetManifest:
    return DatasetManifest.from_json(blobio.load_json(path))


def split(records: list[dict], train_frac: float = 0.8, seed: int = 0) -> None:
    """Stratified in-place train/test assignment: per class, train share +-1 sample."""
    if not 0.0 < train_frac < 1.0:
        raise ArgumentError(f"train_frac must be in (0,1), got {train_frac}")
    rng = rng_from(seed, "split")
    by_label: dict[int, list[int]] = {}
    for i, rec in enumerate(records):
        by_label.setdefault(rec["label"], []).append(i)
    for label in sorted(by_label):
        idx = np.array(by_label[label])
        rng.shuffle(idx)
        n_train = int(round(train_frac * len(idx)))
        for j, i in enumerate(idx):
            records[i]["split"] = "train" if j < n_train else "test"


@dataclass
class Partition:
    assignments: dict[int, list[int]]  # client_id -> sample ids
    mode: str
    k: Optional[int] = None

    @property
    def n_clients(self) -> int:
        return len(self.assignments)


def partition(manifest: DatasetManifest, n_clients: int, mode: str = "iid",
              k: Optional[int] = None, seed: int = 0) -> Partition:
    """Deal the training split to clients.

    iid: per-class round-robin so every client holds an equal share (+-1) of
    every class. noniid_k: the C(4,k) class subsets in lexicographic order are
    assigned to clients round-robin; each class is then dealt equally among the
    clients owning it.
    """
    if n_clients < 1:
        raise ArgumentError(f"n_clients must be >= 1, got {n_clients}")
    if mode not in ("iid", "noniid"):
        raise ArgumentError(f"unknown partition mode {mode!r}")
    if mode == "noniid" and k not in (2, 3):
        raise ArgumentError(f"noniid partitions require k in {{2,3}}, got {k}")

    rng = rng_from(seed, "partition")
    by_label: dict[int, list[int]] = {}
    for rec in manifest.records:
        if rec["split"] == "train":
            by_label.setdefault(rec["label"], []).append(rec["id"])
    labels = sorted(by_label)
    shuffled = {}
    for lab in labels:
        ids = np.array(sorted(by_label[lab]))
        rng.shuffle(ids)
        shuffled[lab] = [int(x) for x in ids]

    assignments: dict[int, list[int]] = {c: [] for c in range(n_clients)}
    if mode == "iid" or n_clients == 1:
        owners_of = {lab: list(range(n_clients)) for lab in labels}
    else:
        subsets = list(itertools.combinations(labels, k))
        client_subset = {c: subsets[c % len(subsets)] for c in range(n_clients)}
        owners_of = {lab: [c for c in range(n_clients) if lab in client_subset[c]] for lab in labels}

    for lab in labels:
        owners = owners_of[lab]
        ids = shuffled[lab]
        if not owners:
            raise PartitionError(f"class {lab} has no owning client with n={n_clients}, k={k}")
        if len(ids) < len(owners):
            raise PartitionError(f"class {lab} has {len(ids)} samples for {len(owners)} owning clients")
        for j, sid in enumerate(ids):
            assignments[owners[j % len(owners)]].append(sid)

    for c in assignments:
        assignments[c].sort()
    return Partition(assignments=assignments, mode=mode if mode == "iid" else f"noniid_{k}", k=k)


def load_split_arrays(manifest: DatasetManifest, root: Path, split_name: str) -> dict:
    """Load one split into memory: raw [0,1] spectrograms, normalized KPI, labels.

    Re-verifies window alignment: both blob paths of a record must carry the
    same window index.
    """
    root = Path(root)
    recs = [r for r in manifest.records if r["split"] == split_name]
    recs.sort(key=lambda r: r["id"])
    if not recs:
        raise ArgumentError(f"split {split_name!r} is empty")
    from .transforms import normalize_kpi

    spec, kpi, labels, ids = [], [], [], []
    for r in recs:
        s_idx = _window_index(r["spec_path"])
        k_idx = _window_index(r["kpi_path"])
        sp = blobio.read_blob(root / r["spec_path"])
        kv = blobio.read_blob(root / r["kpi_path"])
        from ..rfsynth import Spectrogram

        align(Spectrogram(sp, fft_size=r["fft"], window_index=s_idx),
              KpiWindow(kv, grid_dt_ms=0.0, window_index=k_idx))
        spec.append(sp)
        kpi.append(normalize_kpi(kv, manifest.bounds))
        labels.append(r["label"])
        ids.append(r["id"])
    return {
        "spec": np.stack(spec),
        "kpi": np.stack(kpi),
        "labels": np.asarray(labels, dtype=np.int64),
        "ids": np.asarray(ids, dtype=np.int64),
    }


def _window_index(path: str) -> int:
    stem = Path(path).stem  # w000123_spec
    return int(stem.split("_")[0][1:])
