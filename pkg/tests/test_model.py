"""Model architecture tests: shapes, parameter accounting, gradients, fusion."""

import numpy as np
import pytest

from fdcheck import sampled_fd_check
from jamlab import model as M
from jamlab import numcore as nc
from jamlab.errors import ArgumentError, ShapeError
from jamlab.model import (
    ModelConfig,
    ParamViews,
    compute_mean_embeddings,
    count_parameters,
    forward,
    fuse,
    init_params,
    kpi_encode,
    predict,
    project,
    segment_counts,
    spectrum_encode,
    with_mean_embeddings,
)

CFG = ModelConfig(image_size=64, n_kpi_channels=18, kpi_len=256)
TINY = ModelConfig(image_size=16, n_kpi_channels=4, kpi_len=32, d_spec=32, d_kpi=16,
                   n_attn_layers=2, n_heads=2, ffn_hidden=24, head_hidden=16,
                   conv_channels=(4, 8, 8, 16))


def _batch(cfg, n=2, seed=0):
    rng = np.random.default_rng(seed)
    imgs = rng.normal(size=(n, cfg.image_size, cfg.image_size, 3)).astype(np.float32)
    kpi = rng.random((n, cfg.kpi_len, cfg.n_kpi_channels)).astype(np.float32)
    return imgs, kpi


# --- parameter accounting -----------------------------------------------------


def test_spectrum_encoder_param_count_matches_enumeration():
    # conv stack 3->16->32->64->128 (3x3, biases) plus the 128->1024 projection
    assert segment_counts(CFG)["spectrum_encoder"] == 229_536


def test_kpi_input_linear_param_count():
    layout = dict(M.segment_layouts(CFG)["kpi_encoder"])
    n = int(np.prod(layout["in_w"])) + int(np.prod(layout["in_b"]))
    assert n == 18 * 128 + 128 == 2432


def test_count_parameters_consistency():
    n, nbytes = count_parameters(CFG)
    assert nbytes == 4 * n
    assert n == sum(segment_counts(CFG).values())
    p = init_params(CFG, seed=0)
    assert p.total_count == n
    assert p.names == M.SEGMENTS


def test_fusion_strategies_have_consistent_head_dims():
    for fusion in M.FUSIONS:
        cfg = ModelConfig(fusion=fusion)
        p = init_params(cfg, seed=1)
        imgs, kpi = _batch(cfg, n=2, seed=2)
        logits = forward(cfg, p, imgs, kpi)
        assert logits.shape == (2, 4)


# --- spectrum encoder -----------------------------------------------------------


def test_spectrum_zero_image_zero_params_gives_zero_embedding():
    p = init_params(CFG, seed=0).map(np.zeros_like)
    v = ParamViews(CFG, p)
    emb, _ = spectrum_encode(CFG, v, np.zeros((2, 64, 64, 3), dtype=np.float32))
    assert np.all(emb.data == 0.0)


def test_spectrum_embedding_length_for_various_sizes():
    for s in (16, 32, 64):
        cfg = ModelConfig(image_size=s)
        p = init_params(cfg, seed=1)
        emb, tokens = spectrum_encode(cfg, ParamViews(cfg, p), _batch(cfg, 3, seed=s)[0])
        assert emb.shape == (3, 1024)
        assert tokens.shape[2] == cfg.conv_channels[-1]


def test_spectrum_wrong_shape_rejected():
    p = init_params(CFG, seed=1)
    with pytest.raises(ShapeError):
        spectrum_encode(CFG, ParamViews(CFG, p), np.zeros((2, 32, 32, 3), dtype=np.float32))


def test_spectrum_stem_gradient_matches_fd():
    cfg = TINY
    imgs, _ = _batch(cfg, n=2, seed=3)
    p0 = init_params(cfg, seed=4)
    probe = np.random.default_rng(0).normal(size=(cfg.d_spec,)).astype(np.float32)

    def loss(ps):
        emb, _ = spectrum_encode(cfg, ParamViews(cfg, ps), imgs)
        return nc.sum_(nc.mul(emb, nc.Tensor(probe)))

    ad = nc.grad(loss, p0)
    err = sampled_fd_check(loss, p0, ad, np.random.default_rng(5), coords_per_segment=30)
    assert err < 1e-3


# --- KPI encoder -----------------------------------------------------------------


def test_kpi_pooling_weights_sum_to_one():
    p = init_params(TINY, seed=2)
    _, kpi = _batch(TINY, n=3, seed=6)
    _, _, alpha = kpi_encode(TINY, ParamViews(TINY, p), kpi)
    np.testing.assert_allclose(alpha.data.sum(axis=1), 1.0, atol=1e-6)


def test_kpi_embedding_length():
    p = init_params(CFG, seed=2)
    _, kpi = _batch(CFG, n=2, seed=7)
    emb, tokens, _ = kpi_encode(CFG, ParamViews(CFG, p), kpi)
    assert emb.shape == (2, 128)
    assert tokens.shape == (2, 256, 128)


def test_kpi_permutation_sensitivity_with_positional_encoding():
    p = init_params(TINY, seed=3)
    _, kpi = _batch(TINY, n=1, seed=8)
    v = ParamViews(TINY, p)
    base = kpi_encode(TINY, v, kpi)[0].data
    perm = np.random.default_rng(1).permutation(TINY.kpi_len)
    shuffled = kpi_encode(TINY, ParamViews(TINY, p), kpi[:, perm, :])[0].data
    assert np.max(np.abs(base - shuffled)) > 1e-4


def test_kpi_wrong_length_rejected():
    p = init_params(CFG, seed=2)
    with pytest.raises(ShapeError):
        kpi_encode(CFG, ParamViews(CFG, p), np.zeros((2, 128, 18), dtype=np.float32))


# --- fusion ----------------------------------------------------------------------


def test_concat_fusion_length_and_recovery():
    p = init_params(CFG, seed=5)
    v = ParamViews(CFG, p)
    rng = np.random.default_rng(2)
    es = nc.Tensor(rng.normal(size=(2, 1024)).astype(np.float32))
    ek = nc.Tensor(rng.normal(size=(2, 128)).astype(np.float32))
    fused = fuse(CFG, v, es, ek)
    assert fused.shape == (2, 1152)
    np.testing.assert_array_equal(fused.data[:, :1024], es.data)
    np.testing.assert_array_equal(fused.data[:, 1024:], ek.data)


def test_gated_fusion_zero_gate_params_halves_both_sides():
    cfg = ModelConfig(fusion="gated")
    p = init_params(cfg, seed=6)
    # zero the gate weights/bias -> sigmoid(0) = 0.5 on every unit
    layout = M.segment_layouts(cfg)["fusion"]
    flat = p.data("fusion").copy()
    off = 0
    for name, shape in layout:
        size = int(np.prod(shape))
        if name.startswith("gate"):
            flat[off:off + size] = 0.0
        off += size
    p = M.ParamSet.from_arrays([(n, flat if n == "fusion" else t.data) for n, t in p.segments])
    v = ParamViews(cfg, p)
    rng = np.random.default_rng(3)
    es = nc.Tensor(rng.normal(size=(2, 1024)).astype(np.float32))
    ek = nc.Tensor(rng.normal(size=(2, 128)).astype(np.float32))
    es_p = nc.matmul(es, v["fusion.sp_w"]).data + v["fusion.sp_b"].data
    ek_p = nc.matmul(ek, v["fusion.kp_w"]).data + v["fusion.kp_b"].data
    fused = fuse(cfg, v, es, ek)
    np.testing.assert_allclose(fused.data[:, :128], 0.5 * es_p, rtol=1e-5, atol=1e-6)
    np.testing.assert_allclose(fused.data[:, 128:], 0.5 * ek_p, rtol=1e-5, atol=1e-6)


def test_fuse_unknown_strategy_rejected():
    with pytest.raises(ArgumentError):
        ModelConfig(fusion="mystery")


# --- head -------------------------------------------------------------------------


def test_project_zero_input_zero_params_uniform_softmax():
    p = init_params(CFG, seed=7).map(np.zeros_like)
    v = ParamViews(CFG, p)
    logits = project(CFG, v, nc.Tensor(np.zeros((2, 1152), dtype=np.float32)))
    assert logits.shape == (2, 4)
    assert np.all(logits.data == 0.0)
    sm = nc.softmax(logits).data
    np.testing.assert_allclose(sm, 0.25, atol=1e-7)


def test_project_gradient_matches_fd():
    cfg = TINY
    p0 = init_params(cfg, seed=8)
    fused = np.random.default_rng(4).normal(size=(2, cfg.d_fused)).astype(np.float32)

    def loss(ps):
        return nc.cross_entropy(project(cfg, ParamViews(cfg, ps), nc.Tensor(fused)), [0, 3])

    ad = nc.grad(loss, p0)
    err = sampled_fd_check(loss, p0, ad, np.random.default_rng(9), coords_per_segment=25)
    assert err < 1e-3


# --- forward ----------------------------------------------------------------------


def test_forward_equals_manual_composition():
    p = init_params(CFG, seed=9)
    imgs, kpi = _batch(CFG, n=2, seed=10)
    logits = forward(CFG, p, imgs, kpi).data
    v = ParamViews(CFG, p)
    e_s, _ = spectrum_encode(CFG, v, imgs)
    e_k, _, _ = kpi_encode(CFG, v, kpi)
    manual = project(CFG, v, fuse(CFG, v, e_s, e_k)).data
    np.testing.assert_array_equal(logits, manual)


def test_forward_deterministic():
    p = init_params(TINY, seed=10)
    imgs, kpi = _batch(TINY, n=4, seed=11)
    a = forward(TINY, p, imgs, kpi).data
    b = forward(TINY, p, imgs, kpi).data
    np.testing.assert_array_equal(a, b)


def test_spec_only_with_zero_mean_equals_zero_kpi_embedding():
    p = init_params(CFG, seed=11)  # mean embeddings are zero at init
    imgs, kpi = _batch(CFG, n=2, seed=12)
    got = forward(CFG, p, imgs, None, available="spec_only").data
    v = ParamViews(CFG, p)
    e_s, _ = spectrum_encode(CFG, v, imgs)
    zero_k = nc.Tensor(np.zeros((2, 128), dtype=np.float32))
    want = project(CFG, v, fuse(CFG, v, e_s, zero_k)).data
    np.testing.assert_allclose(got, want, atol=1e-7)


def test_mean_embeddings_recomputation_matches_stored():
    p = init_params(TINY, seed=12)
    imgs, kpi = _batch(TINY, n=8, seed=13)
    means = compute_mean_embeddings(TINY, p, imgs, kpi)
    stored = with_mean_embeddings(p, means)
    again = compute_mean_embeddings(TINY, stored, imgs, kpi)
    assert np.max(np.abs(again["kpi_mean_embedding"] - stored.data("kpi_mean_embedding"))) < 1e-5
    assert np.max(np.abs(again["spec_mean_embedding"] - stored.data("spec_mean_embedding"))) < 1e-5


def test_forward_rejects_missing_everything():
    p = init_params(TINY, seed=13)
    with pytest.raises(ArgumentError):
        forward(TINY, p, None, None, available="both")
    with pytest.raises(ArgumentError):
        forward(TINY, p, None, None, available="nothing")


def test_full_model_gradient_check_small_batch():
    cfg = TINY  # 2-sample batch at S=16, T=32
    imgs, kpi = _batch(cfg, n=2, seed=14)
    labels = [1, 3]
    p0 = init_params(cfg, seed=15)

    def loss(ps):
        return nc.cross_entropy(forward(cfg, ps, imgs, kpi), labels)

    ad = nc.grad(loss, p0)
    err = sampled_fd_check(loss, p0, ad, np.random.default_rng(16), coords_per_segment=25)
    assert err < 1e-3


def test_argmax_lowest_index_wins_ties():
    logits = np.array([[0.5, 0.5, 0.1, 0.5]], dtype=np.float32)
    assert predict(logits)[0] == 0


def test_logit_shift_invariance_of_prediction():
    rng = np.random.default_rng(17)
    logits = rng.normal(size=(6, 4)).astype(np.float32)
    np.testing.assert_array_equal(predict(logits), predict(logits + 3.7))


def test_concat_kpi_influence_flows_only_through_kpi_head_columns():
    # zero the head rows fed by the KPI half: logits become KPI-independent
    p = init_params(CFG, seed=18)
    head = p.data("head").copy()
    layout = M.segment_layouts(CFG)["head"]
    off = 0
    for name, shape in layout:
        size = int(np.prod(shape))
        if name == "h1_w":
            w = head[off:off + size].reshape(shape)
            w[CFG.d_spec:, :] = 0.0
            head[off:off + size] = w.reshape(-1)
        off += size
    p_masked = M.ParamSet.from_arrays([(n, head if n == "head" else t.data) for n, t in p.segments])
    imgs, kpi_a = _batch(CFG, n=2, seed=19)
    kpi_b = np.random.default_rng(20).random(kpi_a.shape).astype(np.float32)
    la = forward(CFG, p_masked, imgs, kpi_a).data
    lb = forward(CFG, p_masked, imgs, kpi_b).data
    np.testing.assert_array_equal(la, lb)
    # and with the unmasked head the KPI input does matter
    assert np.max(np.abs(forward(CFG, p, imgs, kpi_a).data - forward(CFG, p, imgs, kpi_b).data)) > 1e-5


def test_missing_modality_for_crossattn_strategies():
    cfg = ModelConfig(fusion="crossattn_img2ts")
    p = init_params(cfg, seed=21)
    imgs, kpi = _batch(cfg, n=2, seed=22)
    assert forward(cfg, p, imgs, None, available="spec_only").shape == (2, 4)
    cfg2 = ModelConfig(fusion="crossattn_ts2img")
    p2 = init_params(cfg2, seed=23)
    with pytest.raises(ArgumentError):
        forward(cfg2, p2, None, kpi, available="kpi_only")
