"""Model-level fixtures and structural invariants."""

import numpy as np
import pytest

from tadet import autodiff as ad
from tadet.autodiff import Tensor
from tadet.model import (
    DeformableAttention,
    ModelConfig,
    TemporalDetectionTransformer,
    _offset_init_pattern,
    positional_encoding,
    temporal_roi_align,
)


def tiny_config(**overrides):
    base = dict(
        num_classes=3,
        feature_dim=8,
        width=16,
        ffn_dim=32,
        encoder_layers=1,
        decoder_layers=2,
        num_heads=2,
        num_points=2,
        num_queries=4,
        sequence_length=12,
        roi_bins=4,
    )
    base.update(overrides)
    return ModelConfig(**base)


# -- positional encoding ------------------------------------------------------


def test_positional_encoding_fixtures():
    pe = positional_encoding(4, 6)
    assert abs(pe[0, 0] - 0.0) < 1e-6  # sin(0)
    assert abs(pe[0, 1] - 1.0) < 1e-6  # cos(0)
    assert abs(pe[1, 0] - np.sin(1.0)) < 1e-6  # 0.841470...
    # even channel gamma uses sin with rate 10000^(gamma/C)
    assert abs(pe[3, 2] - np.sin(3.0 / 10000 ** (2 / 6))) < 1e-12
    assert abs(pe[3, 3] - np.cos(3.0 / 10000 ** (2 / 6))) < 1e-12


def test_positional_encoding_bounded_and_distinct():
    pe = positional_encoding(50, 32)
    assert np.all(np.abs(pe) <= 1.0 + 1e-12)
    assert not np.allclose(pe[0], pe[1])


# -- initialization contract --------------------------------------------------


def test_offset_init_pattern_cycles_over_heads():
    pat = _offset_init_pattern(8, 4).reshape(8, 4)
    want_pos = np.array([1.0, 2.0, 3.0, 4.0])
    for m in range(8):
        if m % 4 == 0:
            assert np.array_equal(pat[m], want_pos)
        elif m % 4 == 2:
            assert np.array_equal(pat[m], -want_pos)
        else:
            assert np.array_equal(pat[m], np.zeros(4))


def test_attention_starts_uniform_with_patterned_offsets():
    rng = np.random.default_rng(0)
    attn = DeformableAttention(rng, width=16, num_heads=4, num_points=4)
    assert np.all(attn.offset_proj.weight.data == 0.0)
    assert np.all(attn.attn_weight_proj.weight.data == 0.0)
    assert np.all(attn.attn_weight_proj.bias.data == 0.0)
    assert np.array_equal(
        attn.offset_proj.bias.data, _offset_init_pattern(4, 4)
    )
    # zero logits soften to exactly uniform 1/K per head
    q = Tensor(rng.normal(size=(3, 16)))
    logits = attn.attn_weight_proj(q)
    weights = ad.softmax(ad.reshape(logits, (3 * 4, 4)), axis=1).data
    assert np.allclose(weights, 0.25)


def test_fresh_attention_interpolates_features_exactly():
    # identity value/output projections, zero offsets, uniform weights:
    # the module must reduce to plain linear interpolation of x at the
    # reference coordinate
    rng = np.random.default_rng(1)
    attn = DeformableAttention(rng, width=6, num_heads=2, num_points=3)
    attn.value_proj.weight.data = np.eye(6)
    attn.value_proj.bias.data[:] = 0.0
    attn.output_proj.weight.data = np.eye(6)
    attn.output_proj.bias.data[:] = 0.0
    attn.offset_proj.bias.data[:] = 0.0

    t = 10
    x = rng.normal(size=(t, 6))
    refs = np.array([0.0, 0.25, 0.77, 1.0])
    out = attn(
        Tensor(rng.normal(size=(4, 6))),
        Tensor(refs),
        Tensor(x),
        t,
        np.zeros(4, dtype=np.int64),
    )
    u = refs * (t - 1)
    i0 = np.minimum(np.floor(u).astype(int), t - 2)
    f = u - i0
    want = (1 - f)[:, None] * x[i0] + f[:, None] * x[i0 + 1]
    assert np.allclose(out.data, want, atol=1e-12)


def test_attention_weighted_sum_oracle():
    # one head, K=2, hand-set offsets and logits; output must equal the
    # explicit weighted sum of the two sampled rows
    rng = np.random.default_rng(2)
    attn = DeformableAttention(rng, width=4, num_heads=1, num_points=2)
    attn.value_proj.weight.data = np.eye(4)
    attn.value_proj.bias.data[:] = 0.0
    attn.output_proj.weight.data = np.eye(4)
    attn.output_proj.bias.data[:] = 0.0
    attn.offset_proj.bias.data[:] = np.array([1.0, -2.0])
    attn.attn_weight_proj.bias.data[:] = np.array([np.log(3.0), 0.0])  # weights 3/4, 1/4

    t = 8
    x = rng.normal(size=(t, 4))
    ref = np.array([4.0 / (t - 1)])  # lands exactly on frame 4
    out = attn(Tensor(np.zeros((1, 4))), Tensor(ref), Tensor(x), t,
               np.zeros(1, dtype=np.int64))
    want = 0.75 * x[5] + 0.25 * x[2]
    assert np.allclose(out.data[0], want, atol=1e-12)


def test_attention_is_linear_in_features():
    rng = np.random.default_rng(3)
    attn = DeformableAttention(rng, width=8, num_heads=2, num_points=2)
    attn.value_proj.bias.data[:] = 0.0
    attn.output_proj.bias.data[:] = 0.0
    q = Tensor(rng.normal(size=(3, 8)))
    refs = Tensor(np.array([0.2, 0.5, 0.9]))
    x = rng.normal(size=(12, 8))
    off = np.zeros(3, dtype=np.int64)
    out1 = attn(q, refs, Tensor(x), 12, off).data
    out2 = attn(q, refs, Tensor(2.0 * x), 12, off).data
    assert np.allclose(out2, 2.0 * out1, atol=1e-10)


# -- segment refinement -------------------------------------------------------


def test_refinement_zero_delta_is_identity():
    seg = Tensor(np.array([[0.3, 0.2], [0.8, 0.05]]))
    out = ad.sigmoid(ad.add(Tensor(np.zeros((2, 2))), ad.inverse_sigmoid(seg)))
    assert np.allclose(out.data, seg.data, atol=1e-9)


def test_refinement_unit_delta_from_half():
    seg = Tensor(np.array([[0.5, 0.5]]))
    out = ad.sigmoid(ad.add(Tensor(np.ones((1, 2))), ad.inverse_sigmoid(seg)))
    assert np.allclose(out.data, 1.0 / (1.0 + np.exp(-1.0)), atol=1e-9)  # 0.731058...


def test_without_refinement_layers_share_the_initial_anchor():
    cfg = tiny_config(enable_refinement=False)
    m = TemporalDetectionTransformer(cfg, seed=0)
    # zero the segment head so every layer predicts exactly its anchor
    for lin in m.segment_head.layers:
        lin.weight.data[:] = 0.0
        lin.bias.data[:] = 0.0
    x = np.random.default_rng(0).normal(size=(1, cfg.sequence_length, cfg.feature_dim))
    res = m.forward(x)
    segs = [s.data for s in res.layers.segments]
    for s in segs[1:]:
        assert np.allclose(s, segs[0], atol=1e-12)
    assert np.allclose(segs[0][:, 1], 0.5, atol=1e-12)


def test_with_refinement_anchor_chains_through_layers():
    cfg = tiny_config(enable_refinement=True)
    m = TemporalDetectionTransformer(cfg, seed=0)
    x = np.random.default_rng(0).normal(size=(1, cfg.sequence_length, cfg.feature_dim))
    res = m.forward(x)
    # layer 2 cross-attention reads the layer 1 segment center as reference
    assert np.allclose(
        res.layers.references[1], res.layers.segments[0].data[:, 0], atol=1e-12
    )


# -- RoI alignment ------------------------------------------------------------


def test_roi_align_constant_features():
    x = Tensor(np.full((10, 3), 2.5))
    segs = Tensor(np.array([[0.5, 0.3]]))
    out = temporal_roi_align(x, segs, 10, bins=4, expansion=1.0)
    assert out.shape == (1, 4, 3)
    assert np.allclose(out.data, 2.5, atol=1e-12)


def test_roi_align_linear_ramp_hits_bin_midpoints():
    # features equal to the frame index: each bin must average to the frame
    # coordinate of its midpoint
    t, bins = 20, 4
    x = Tensor(np.arange(t, dtype=np.float64)[:, None])
    center, length, expansion = 0.5, 0.4, 1.5
    segs = Tensor(np.array([[center, length]]))
    out = temporal_roi_align(x, segs, t, bins=bins, expansion=expansion)
    span = length * expansion
    lo = center - span / 2
    mids = lo + (np.arange(bins) + 0.5) / bins * span
    assert np.allclose(out.data[:, :, 0], mids * (t - 1), atol=1e-10)


def test_roi_align_row_offset_isolates_samples():
    # identical segments in two stacked sequences read their own rows
    x = np.zeros((12, 1))
    x[6:, 0] = 100.0
    segs = Tensor(np.array([[0.5, 0.4], [0.5, 0.4]]))
    out = temporal_roi_align(
        Tensor(x), segs, 6, bins=2, expansion=1.0,
        row_offset=np.array([0, 6]),
    )
    assert np.all(out.data[0] < 10.0)
    assert np.all(out.data[1] >= 100.0 - 1e-9)


def test_roi_align_gradients_flow_to_coordinates():
    x = Tensor(np.random.default_rng(0).normal(size=(10, 2)))
    segs = Tensor(np.array([[0.4, 0.3]]), requires_grad=True)
    out = temporal_roi_align(x, segs, 10, bins=2, expansion=1.5)
    ad.sum_(out).backward()
    assert segs.grad is not None and np.any(segs.grad != 0.0)


# -- whole-model structure ----------------------------------------------------


def test_fixed_cardinality_and_shapes():
    cfg = tiny_config()
    m = TemporalDetectionTransformer(cfg, seed=0)
    x = np.random.default_rng(0).normal(size=(3, cfg.sequence_length, cfg.feature_dim))
    dets = m.predict(x)
    assert len(dets) == 3
    for d in dets:
        assert d.segments.shape == (cfg.num_queries, 2)
        assert d.scores.shape == (cfg.num_queries,)
        assert d.class_probs.shape == (cfg.num_queries, cfg.num_classes + 1)
        assert np.allclose(d.class_probs.sum(axis=1), 1.0)
        assert np.all((d.segments > 0.0) & (d.segments < 1.0))
        assert np.all((d.actionness >= 0.0) & (d.actionness <= 1.0))


def test_query_permutation_permutes_outputs():
    cfg = tiny_config()
    x = np.random.default_rng(5).normal(size=(2, cfg.sequence_length, cfg.feature_dim))
    m = TemporalDetectionTransformer(cfg, seed=0)
    base = m.predict(x)
    perm = np.array([2, 0, 3, 1])
    m.query_embed.data = m.query_embed.data[perm]
    permuted = m.predict(x)
    for d0, d1 in zip(base, permuted):
        assert np.allclose(d1.segments, d0.segments[perm], atol=1e-9)
        assert np.allclose(d1.class_probs, d0.class_probs[perm], atol=1e-9)
        assert np.allclose(d1.scores, d0.scores[perm], atol=1e-9)


def test_batched_forward_matches_single(seed=7):
    cfg = tiny_config()
    m = TemporalDetectionTransformer(cfg, seed=1)
    x = np.random.default_rng(seed).normal(size=(3, cfg.sequence_length, cfg.feature_dim))
    together = m.predict(x)
    for b in range(3):
        alone = m.predict(x[b : b + 1])[0]
        assert np.allclose(alone.segments, together[b].segments, atol=1e-10)
        assert np.allclose(alone.scores, together[b].scores, atol=1e-10)


def test_seeded_construction_is_deterministic():
    cfg = tiny_config()
    a = TemporalDetectionTransformer(cfg, seed=9).state_dict()
    b = TemporalDetectionTransformer(cfg, seed=9).state_dict()
    for name in a:
        assert np.array_equal(a[name], b[name])


def test_state_dict_round_trip_and_errors():
    cfg = tiny_config()
    m = TemporalDetectionTransformer(cfg, seed=0)
    state = m.state_dict()
    m2 = TemporalDetectionTransformer(cfg, seed=4)
    m2.load_state(state)
    x = np.random.default_rng(0).normal(size=(1, cfg.sequence_length, cfg.feature_dim))
    assert np.allclose(m.predict(x)[0].scores, m2.predict(x)[0].scores)

    missing = dict(state)
    missing.pop("class_head.weight")
    with pytest.raises(KeyError, match="class_head.weight"):
        TemporalDetectionTransformer(cfg, seed=0).load_state(missing)

    bad = dict(state)
    bad["class_head.weight"] = np.zeros((2, 2))
    with pytest.raises(ValueError, match="class_head.weight"):
        TemporalDetectionTransformer(cfg, seed=0).load_state(bad)


def test_variant_forward_paths():
    for kw in (
        dict(attention_kind="dense"),
        dict(encoder_kind="cnn1d"),
        dict(enable_actionness=False),
        dict(enable_refinement=False, enable_actionness=False),
    ):
        cfg = tiny_config(**kw)
        m = TemporalDetectionTransformer(cfg, seed=0)
        x = np.random.default_rng(0).normal(size=(2, cfg.sequence_length, cfg.feature_dim))
        dets = m.predict(x)
        assert len(dets) == 2 and dets[0].segments.shape == (cfg.num_queries, 2)


def test_config_validation():
    with pytest.raises(ValueError):
        tiny_config(width=15)  # not divisible by heads
    with pytest.raises(ValueError):
        tiny_config(attention_kind="banana")
    with pytest.raises(ValueError):
        tiny_config(num_queries=0)


def test_feature_dim_mismatch_raises():
    cfg = tiny_config()
    m = TemporalDetectionTransformer(cfg, seed=0)
    with pytest.raises(ValueError, match="feature dim"):
        m.forward(np.zeros((1, cfg.sequence_length, cfg.feature_dim + 1)))
