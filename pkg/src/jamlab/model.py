"""The multimodal classifier.

Spectrum branch: a small strided conv stack (LiteConv) ending in a 1024-d
embedding. KPI branch: linear projection to 128-d plus learned positional
encoding, four pre-norm self-attention blocks, attention pooling to a 128-d
embedding. A fusion strategy combines the two embeddings and a two-layer head
produces the four class logits.

All trainable parameters live in a six-segment ParamSet (one flat vector per
segment); forward passes slice weight views out of the segments so gradients
accumulate straight into per-segment buffers.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import numcore as nc
from .errors import ArgumentError, ShapeError
from .numcore import ParamSet, Tensor
from .seeding import rng_from

FUSIONS = ("concat", "gated", "crossattn_img2ts", "crossattn_ts2img", "selfattn")
SEGMENTS = ("spectrum_encoder", "kpi_encoder", "fusion", "head",
            "kpi_mean_embedding", "spec_mean_embedding")
AVAILABILITY = ("both", "spec_only", "kpi_only")


@dataclass(frozen=True)
class ModelConfig:
    image_size: int = 64
    n_kpi_channels: int = 18
    kpi_len: int = 256
    d_spec: int = 1024
    d_kpi: int = 128
    n_attn_layers: int = 4
    n_heads: int = 4
    ffn_hidden: int = 256
    head_hidden: int = 256
    n_classes: int = 4
    fusion: str = "concat"
    conv_channels: tuple[int, ...] = (16, 32, 64, 128)

    def __post_init__(self):
        if self.fusion not in FUSIONS:
            raise ArgumentError(f"unknown fusion strategy {self.fusion!r}; expected one of {FUSIONS}")
        if self.d_kpi % self.n_heads:
            raise ArgumentError(f"n_heads {self.n_heads} must divide d_kpi {self.d_kpi}")
        if self.image_size < 16:
            raise ArgumentError(f"image_size must be >= 16, got {self.image_size}")

    @property
    def d_fused(self) -> int:
        return {
            "concat": self.d_spec + self.d_kpi,
            "gated": 2 * self.d_kpi,
            "crossattn_img2ts": self.d_spec + self.d_kpi,
            "crossattn_ts2img": 2 * self.d_kpi,
            "selfattn": self.d_kpi,
        }[self.fusion]

    def to_dict(self) -> dict:
        return {
            "image_size": self.image_size, "n_kpi_channels": self.n_kpi_channels,
            "kpi_len": self.kpi_len, "d_spec": self.d_spec, "d_kpi": self.d_kpi,
            "n_attn_layers": self.n_attn_layers, "n_heads": self.n_heads,
            "ffn_hidden": self.ffn_hidden, "head_hidden": self.head_hidden,
            "n_classes": self.n_classes, "fusion": self.fusion,
            "conv_channels": list(self.conv_channels),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        d = dict(d)
        if "conv_channels" in d:
            d["conv_channels"] = tuple(d["conv_channels"])
        return cls(**d)


# --- parameter layout -----------------------------------------------------------


def segment_layouts(cfg: ModelConfig) -> dict[str, list[tuple[str, tuple[int, ...]]]]:
    """Ordered (name, shape) tables per segment; init and views follow this order."""
    d, dk = cfg.d_kpi, cfg.d_kpi
    spectrum = []
    cin = 3
    for i, cout in enumerate(cfg.conv_channels):
        spectrum += [(f"conv{i}_w", (cout, cin, 3, 3)), (f"conv{i}_b", (cout,))]
        cin = cout
    spectrum += [("out_w", (cin, cfg.d_spec)), ("out_b", (cfg.d_spec,))]

    kpi = [("in_w", (cfg.n_kpi_channels, d)), ("in_b", (d,)), ("pos", (cfg.kpi_len, d))]
    for l in range(cfg.n_attn_layers):
        kpi += [
            (f"l{l}_ln1_g", (d,)), (f"l{l}_ln1_b", (d,)),
            (f"l{l}_wq", (d, d)), (f"l{l}_bq", (d,)),
            (f"l{l}_wk", (d, d)), (f"l{l}_bk", (d,)),
            (f"l{l}_wv", (d, d)), (f"l{l}_bv", (d,)),
            (f"l{l}_wo", (d, d)), (f"l{l}_bo", (d,)),
            (f"l{l}_ln2_g", (d,)), (f"l{l}_ln2_b", (d,)),
            (f"l{l}_ffn1_w", (d, cfg.ffn_hidden)), (f"l{l}_ffn1_b", (cfg.ffn_hidden,)),
            (f"l{l}_ffn2_w", (cfg.ffn_hidden, d)), (f"l{l}_ffn2_b", (d,)),
        ]
    kpi += [("pool_w", (d, d)), ("pool_b", (d,)), ("pool_v", (d,))]

    fusion: list[tuple[str, tuple[int, ...]]] = []
    if cfg.fusion == "gated":
        fusion = [("sp_w", (cfg.d_spec, dk)), ("sp_b", (dk,)),
                  ("kp_w", (dk, dk)), ("kp_b", (dk,)),
                  ("gate_w", (2 * dk, dk)), ("gate_b", (dk,))]
    elif cfg.fusion == "crossattn_img2ts":
        fusion = [("q_w", (cfg.d_spec, dk)), ("q_b", (dk,)),
                  ("k_w", (dk, dk)), ("k_b", (dk,)),
                  ("v_w", (dk, dk)), ("v_b", (dk,))]
    elif cfg.fusion == "crossattn_ts2img":
        fusion = [("q_w", (dk, dk)), ("q_b", (dk,)),
                  ("k_w", (dk, dk)), ("k_b", (dk,)),
                  ("v_w", (dk, dk)), ("v_b", (dk,))]
    elif cfg.fusion == "selfattn":
        fusion = [("sp_w", (cfg.d_spec, dk)), ("sp_b", (dk,)),
                  ("kp_w", (dk, dk)), ("kp_b", (dk,)),
                  ("wq", (dk, dk)), ("bq", (dk,)), ("wk", (dk, dk)), ("bk", (dk,)),
                  ("wv", (dk, dk)), ("bv", (dk,)), ("wo", (dk, dk)), ("bo", (dk,))]

    head = [("h1_w", (cfg.d_fused, cfg.head_hidden)), ("h1_b", (cfg.head_hidden,)),
            ("h2_w", (cfg.head_hidden, cfg.n_classes)), ("h2_b", (cfg.n_classes,))]

    return {
        "spectrum_encoder": spectrum,
        "kpi_encoder": kpi,
        "fusion": fusion,
        "head": head,
        "kpi_mean_embedding": [("value", (dk,))],
        "spec_mean_embedding": [("value", (cfg.d_spec,))],
    }


def count_parameters(cfg: ModelConfig) -> tuple[int, int]:
    """Exact parameter count and FP32 byte size, enumerated from the layout."""
    n = sum(int(np.prod(s)) for layout in segment_layouts(cfg).values() for _, s in layout)
    return n, 4 * n


def segment_counts(cfg: ModelConfig) -> dict[str, int]:
    return {seg: sum(int(np.prod(s)) for _, s in layout)
            for seg, layout in segment_layouts(cfg).items()}


def init_params(cfg: ModelConfig, seed: int) -> ParamSet:
    """Deterministic init: Kaiming-uniform fan-in for weights, zero biases,
    ones for layer-norm gains, N(0, 0.02) for positional/pooling vectors,
    zeros for the mean-embedding segments."""
    rng = rng_from(seed, "init")
    segments = []
    for seg_name, layout in segment_layouts(cfg).items():
        total = sum(int(np.prod(s)) for _, s in layout)
        flat = np.zeros(total, dtype=np.float32)
        off = 0
        for name, shape in layout:
            size = int(np.prod(shape))
            if seg_name in ("kpi_mean_embedding", "spec_mean_embedding"):
                vals = np.zeros(shape, dtype=np.float32)
            elif name.endswith("_g"):
                vals = np.ones(shape, dtype=np.float32)
            elif name == "pos" or name == "pool_v":
                vals = rng.normal(0.0, 0.02, size=shape).astype(np.float32)
            elif name.endswith("_b") or name.endswith("_bias") or name.startswith("b") and len(shape) == 1:
                vals = np.zeros(shape, dtype=np.float32)
            elif len(shape) == 1:
                vals = np.zeros(shape, dtype=np.float32)
            else:
                fan_in = int(np.prod(shape[1:])) if len(shape) == 4 else shape[0]
                limit = np.sqrt(6.0 / fan_in)
                vals = rng.uniform(-limit, limit, size=shape).astype(np.float32)
            flat[off:off + size] = vals.reshape(-1)
            off += size
        segments.append((seg_name, flat))
    return ParamSet.from_arrays(segments)


class ParamViews:
    """Named weight views sliced out of a leaf ParamSet for one graph."""

    def __init__(self, cfg: ModelConfig, params: ParamSet):
        self.cfg = cfg
        self._views: dict[str, Tensor] = {}
        for seg_name, layout in segment_layouts(cfg).items():
            seg = params[seg_name]
            expected = sum(int(np.prod(s)) for _, s in layout)
            if seg.size != expected:
                raise ShapeError(f"segment {seg_name} holds {seg.size} values, layout needs {expected}")
            off = 0
            for name, shape in layout:
                size = int(np.prod(shape))
                self._views[f"{seg_name}.{name}"] = nc.reshape(nc.slice_(seg, off, off + size), shape)
                off += size

    def __getitem__(self, key: str) -> Tensor:
        return self._views[key]


# --- forward passes ---------------------------------------------------------------


def _linear(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    return nc.add(nc.matmul(x, w), b)


def spectrum_encode(cfg: ModelConfig, v: ParamViews, images: np.ndarray) -> tuple[Tensor, Tensor]:
    """images: [B, S, S, 3] standardized floats -> (embedding [B, d_spec],
    pre-pooling tokens [B, P, conv_channels[-1]])."""
    if images.ndim != 4 or images.shape[1] != cfg.image_size or images.shape[3] != 3:
        raise ShapeError(f"expected [B,{cfg.image_size},{cfg.image_size},3] images, got {images.shape}")
    x = Tensor(np.ascontiguousarray(images.transpose(0, 3, 1, 2)))
    for i in range(len(cfg.conv_channels)):
        x = nc.relu(nc.conv2d(x, v[f"spectrum_encoder.conv{i}_w"], v[f"spectrum_encoder.conv{i}_b"],
                              stride=2, padding=1))
    b, c, h, w = x.shape
    tokens = nc.transpose(nc.reshape(x, (b, c, h * w)), (0, 2, 1))
    gap = nc.mean(x, axis=(2, 3))
    emb = _linear(gap, v["spectrum_encoder.out_w"], v["spectrum_encoder.out_b"])
    return emb, tokens


def _split_heads(x: Tensor, n_heads: int) -> Tensor:
    b, t, d = x.shape
    return nc.transpose(nc.reshape(x, (b, t, n_heads, d // n_heads)), (0, 2, 1, 3))


def _merge_heads(x: Tensor) -> Tensor:
    b, h, t, dh = x.shape
    return nc.reshape(nc.transpose(x, (0, 2, 1, 3)), (b, t, h * dh))


def _self_attention(v: ParamViews, prefix: str, x: Tensor, n_heads: int) -> Tensor:
    q = _split_heads(_linear(x, v[f"{prefix}wq"], v[f"{prefix}bq"]), n_heads)
    k = _split_heads(_linear(x, v[f"{prefix}wk"], v[f"{prefix}bk"]), n_heads)
    kv = _split_heads(_linear(x, v[f"{prefix}wv"], v[f"{prefix}bv"]), n_heads)
    dh = q.shape[-1]
    scores = nc.mul(nc.matmul(q, nc.transpose(k, (0, 1, 3, 2))), 1.0 / np.sqrt(dh))
    att = nc.matmul(nc.softmax(scores, axis=-1), kv)
    return _linear(_merge_heads(att), v[f"{prefix}wo"], v[f"{prefix}bo"])


def kpi_encode(cfg: ModelConfig, v: ParamViews, windows: np.ndarray) -> tuple[Tensor, Tensor, Tensor]:
    """windows: [B, T, N] normalized KPI grids -> (embedding [B, d_kpi],
    token sequence [B, T, d_kpi], pooling weights [B, T])."""
    if windows.ndim != 3 or windows.shape[1] != cfg.kpi_len or windows.shape[2] != cfg.n_kpi_channels:
        raise ShapeError(f"expected [B,{cfg.kpi_len},{cfg.n_kpi_channels}] KPI windows, got {windows.shape}")
    h = _linear(Tensor(windows), v["kpi_encoder.in_w"], v["kpi_encoder.in_b"])
    h = nc.add(h, v["kpi_encoder.pos"])
    for l in range(cfg.n_attn_layers):
        a = nc.layer_norm(h, v[f"kpi_encoder.l{l}_ln1_g"], v[f"kpi_encoder.l{l}_ln1_b"])
        h = nc.add(h, _self_attention(v, f"kpi_encoder.l{l}_", a, cfg.n_heads))
        f = nc.layer_norm(h, v[f"kpi_encoder.l{l}_ln2_g"], v[f"kpi_encoder.l{l}_ln2_b"])
        f = _linear(nc.relu(_linear(f, v[f"kpi_encoder.l{l}_ffn1_w"], v[f"kpi_encoder.l{l}_ffn1_b"])),
                    v[f"kpi_encoder.l{l}_ffn2_w"], v[f"kpi_encoder.l{l}_ffn2_b"])
        h = nc.add(h, f)
    score_h = nc.tanh(_linear(h, v["kpi_encoder.pool_w"], v["kpi_encoder.pool_b"]))
    scores = nc.reshape(nc.matmul(score_h, nc.reshape(v["kpi_encoder.pool_v"], (cfg.d_kpi, 1))),
                        (h.shape[0], h.shape[1]))
    alpha = nc.softmax(scores, axis=-1)
    pooled = nc.reshape(nc.matmul(nc.reshape(alpha, (h.shape[0], 1, h.shape[1])), h),
                        (h.shape[0], cfg.d_kpi))
    return pooled, h, alpha


def _single_query_attention(v: ParamViews, query: Tensor, tokens: Tensor, d: int) -> Tensor:
    q = _linear(query, v["fusion.q_w"], v["fusion.q_b"])
    k = _linear(tokens, v["fusion.k_w"], v["fusion.k_b"])
    kv = _linear(tokens, v["fusion.v_w"], v["fusion.v_b"])
    b = q.shape[0]
    q3 = nc.reshape(q, (b, 1, d))
    scores = nc.mul(nc.matmul(q3, nc.transpose(k, (0, 2, 1))), 1.0 / np.sqrt(d))
    att = nc.matmul(nc.softmax(scores, axis=-1), kv)
    return nc.reshape(att, (b, d))


def fuse(cfg: ModelConfig, v: ParamViews, e_spec: Tensor, e_kpi: Tensor,
         spec_tokens: Optional[Tensor] = None, kpi_tokens: Optional[Tensor] = None) -> Tensor:
    """Combine the modality embeddings per the configured strategy."""
    d = cfg.d_kpi
    if cfg.fusion == "concat":
        return nc.concat([e_spec, e_kpi], axis=-1)
    if cfg.fusion == "gated":
        es = _linear(e_spec, v["fusion.sp_w"], v["fusion.sp_b"])
        ek = _linear(e_kpi, v["fusion.kp_w"], v["fusion.kp_b"])
        g = nc.sigmoid(_linear(nc.concat([es, ek], axis=-1), v["fusion.gate_w"], v["fusion.gate_b"]))
        one_minus = nc.add(nc.mul(g, -1.0), 1.0)
        return nc.concat([nc.mul(g, es), nc.mul(one_minus, ek)], axis=-1)
    if cfg.fusion == "crossattn_img2ts":
        if kpi_tokens is None:
            raise ArgumentError("crossattn_img2ts needs the KPI token sequence")
        att = _single_query_attention(v, e_spec, kpi_tokens, d)
        return nc.concat([e_spec, att], axis=-1)
    if cfg.fusion == "crossattn_ts2img":
        if spec_tokens is None:
            raise ArgumentError("crossattn_ts2img needs the spectrum token sequence")
        att = _single_query_attention(v, e_kpi, spec_tokens, d)
        return nc.concat([e_kpi, att], axis=-1)
    if cfg.fusion == "selfattn":
        es = _linear(e_spec, v["fusion.sp_w"], v["fusion.sp_b"])
        ek = _linear(e_kpi, v["fusion.kp_w"], v["fusion.kp_b"])
        b = es.shape[0]
        pair = nc.concat([nc.reshape(es, (b, 1, d)), nc.reshape(ek, (b, 1, d))], axis=1)
        att = _self_attention(v, "fusion.", pair, n_heads=1)
        return nc.mean(att, axis=1)
    raise ArgumentError(f"unknown fusion strategy {cfg.fusion!r}")


def project(cfg: ModelConfig, v: ParamViews, fused: Tensor) -> Tensor:
    if fused.shape[-1] != cfg.d_fused:
        raise ShapeError(f"fused vector of {fused.shape[-1]} dims; head expects {cfg.d_fused}")
    hidden = nc.relu(_linear(fused, v["head.h1_w"], v["head.h1_b"]))
    return _linear(hidden, v["head.h2_w"], v["head.h2_b"])


def _broadcast_mean(v: ParamViews, segment: str, batch: int, dim: int) -> Tensor:
    mean = nc.reshape(v[f"{segment}.value"], (1, dim))
    return nc.add(Tensor(np.zeros((batch, dim), dtype=np.float32)), mean)


def forward(cfg: ModelConfig, params: ParamSet, images: Optional[np.ndarray],
            windows: Optional[np.ndarray], available: str = "both") -> Tensor:
    """Full model: encoders -> fusion -> head -> logits [B, n_classes].

    A missing modality's embedding is replaced by the stored training-set mean
    embedding segment; the same fusion and head then apply. The strategy
    crossattn_ts2img cannot run without the spectrum token sequence and rejects
    available='kpi_only'.
    """
    if available not in AVAILABILITY:
        raise ArgumentError(f"availability must be one of {AVAILABILITY}, got {available!r}")
    if available == "both" and (images is None or windows is None):
        raise ArgumentError("available='both' needs both modalities")
    if available == "spec_only" and images is None or available == "kpi_only" and windows is None:
        raise ArgumentError("the declared available modality was not provided")

    v = ParamViews(cfg, params)
    batch = images.shape[0] if available != "kpi_only" else windows.shape[0]

    spec_tokens = kpi_tokens = None
    if available in ("both", "spec_only"):
        e_spec, spec_tokens = spectrum_encode(cfg, v, images)
    else:
        if cfg.fusion == "crossattn_ts2img":
            raise ArgumentError("crossattn_ts2img needs the spectrum tokens; cannot run kpi_only")
        e_spec = _broadcast_mean(v, "spec_mean_embedding", batch, cfg.d_spec)
    if available in ("both", "kpi_only"):
        e_kpi, kpi_tokens, _ = kpi_encode(cfg, v, windows)
    else:
        e_kpi = _broadcast_mean(v, "kpi_mean_embedding", batch, cfg.d_kpi)
        if cfg.fusion == "crossattn_img2ts":
            kpi_tokens = nc.reshape(e_kpi, (batch, 1, cfg.d_kpi))

    fused = fuse(cfg, v, e_spec, e_kpi, spec_tokens=spec_tokens, kpi_tokens=kpi_tokens)
    return project(cfg, v, fused)


def predict(logits: np.ndarray) -> np.ndarray:
    """Deterministic class decisions: lowest index wins exact ties."""
    return np.argmax(logits, axis=-1)


def compute_mean_embeddings(cfg: ModelConfig, params: ParamSet, images: Optional[np.ndarray],
                            windows: Optional[np.ndarray], batch_size: int = 64) -> dict[str, np.ndarray]:
    """Dataset-mean encoder outputs, used as the missing-modality stand-ins."""
    out: dict[str, np.ndarray] = {}
    with nc.no_grad():
        v = ParamViews(cfg, params)
        if images is not None:
            acc = np.zeros(cfg.d_spec, dtype=np.float64)
            for i in range(0, len(images), batch_size):
                emb, _ = spectrum_encode(cfg, v, images[i:i + batch_size])
                acc += emb.data.sum(axis=0)
            out["spec_mean_embedding"] = (acc / len(images)).astype(np.float32)
        if windows is not None:
            acc = np.zeros(cfg.d_kpi, dtype=np.float64)
            for i in range(0, len(windows), batch_size):
                emb, _, _ = kpi_encode(cfg, v, windows[i:i + batch_size])
                acc += emb.data.sum(axis=0)
            out["kpi_mean_embedding"] = (acc / len(windows)).astype(np.float32)
    return out


def with_mean_embeddings(params: ParamSet, means: dict[str, np.ndarray]) -> ParamSet:
    return ParamSet.from_arrays([
        (name, means[name].copy() if name in means else t.data.copy())
        for name, t in params.segments
    ])
