"""Dataset pipeline: alignment, interpolation, ATD, normalization,
augmentation, scenario-grid assembly, splitting and client partitioning."""

from .dataset import (
    CLASS_NAMES,
    DatasetManifest,
    GenSpec,
    GridCell,
    Partition,
    assemble_dataset,
    build_grid,
    load_manifest,
    load_split_arrays,
    partition,
    sample_jam_spec,
    split,
    synth_window,
)
from .transforms import (
    AugmentConfig,
    IMAGENET_MEAN,
    IMAGENET_STD,
    KpiWindow,
    MultimodalSample,
    align,
    atd_downsample,
    augment,
    cutout,
    hflip,
    interpolate_uniform,
    normalize_kpi,
    standardize,
    vflip,
)

__all__ = [
    "AugmentConfig", "CLASS_NAMES", "DatasetManifest", "GenSpec", "GridCell",
    "IMAGENET_MEAN", "IMAGENET_STD", "KpiWindow", "MultimodalSample", "Partition",
    "align", "assemble_dataset", "atd_downsample", "augment", "build_grid",
    "cutout", "hflip", "interpolate_uniform", "load_manifest", "load_split_arrays",
    "normalize_kpi", "partition", "sample_jam_spec", "split", "standardize",
    "synth_window", "vflip",
]
