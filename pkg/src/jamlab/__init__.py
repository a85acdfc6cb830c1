"""jamlab: a seeded, desk-scale workbench for multimodal federated jamming detection.

Subpackages and modules:
    numcore   tensors, reverse-mode autodiff, Adam, LR schedule, cross-entropy
    rfsynth   complex-baseband traffic/jammer synthesis and spectrogram rendering
    kpisynth  cross-layer KPI stream synthesis with jam-coupled degradation
    pipeline  alignment, interpolation, downsampling, augmentation, datasets
    model     dual-encoder classifier: spectrum CNN + KPI transformer + fusion
    fed       synchronous federated training loop and aggregation schemes
    sysmodel  analytic round-latency, payload and inference-delay models
    cli       gen-data / train / eval / latency / inspect commands
"""

__version__ = "0.1.0"
