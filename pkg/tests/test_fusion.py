"""Fusion encoder tests: shape contracts, identity inits, parameter ordering."""

import numpy as np
import pytest

from navlab import keypoints as kp
from navlab.errors import ConfigurationError
from navlab.fusion import (AffineMapper, BackboneSpec, FusionConfig, build_encoder,
                           eigencam, map_affine)
from navlab.nd import Tensor, ops

SPEC = BackboneSpec.tiny()
RES = 32


def images(n, seed=0, res=RES):
    rng = np.random.default_rng(seed)
    return rng.random((n, 3, res, res)).astype(np.float32)


def make(mechanism, seed=0, **kw):
    cfg = FusionConfig(mechanism=mechanism, embed_dim=SPEC.embed_dim, **kw)
    return build_encoder(cfg, SPEC, RES, np.random.default_rng(seed))


def zk_all_pad(k=16, n=1):
    return np.full((n, 4 * k), -1.0, dtype=np.float32)


# -- late fusion -----------------------------------------------------------------

def test_late_output_shape():
    enc = make("late")
    out = enc.encode(images(2), images(2, 1))
    assert out.shape == (2, SPEC.embed_dim)


def test_tied_halves_identical_separate_differ():
    v = images(1, 3)
    tied = make("late", modeling="tied")
    eo, eg = tied._halves(Tensor(v), Tensor(v))
    np.testing.assert_array_equal(eo.data, eg.data)
    sep = make("late", modeling="separate")
    eo, eg = sep._halves(Tensor(v), Tensor(v))
    assert np.abs(eo.data - eg.data).max() > 1e-4


# -- early fusion ----------------------------------------------------------------

def test_early_channel_stem_consumes_six_channels():
    cfg = FusionConfig(mechanism="early", early_concat="channel", embed_dim=SPEC.embed_dim)
    enc = build_encoder(cfg, SPEC, 128, np.random.default_rng(0))
    assert enc.encoder.trunk.stem.w.shape[:2] == (SPEC.stem_channels, 6)
    rng = np.random.default_rng(1)
    big = rng.random((1, 3, 128, 128)).astype(np.float32)
    assert enc.encode(big, big).shape == (1, SPEC.embed_dim)


def test_early_edge_doubles_width():
    # hand-tracked spatial sizes: (32,64) -> stem (16,32) -> blocks (8,16),(4,8),(2,4),(2,4)
    enc = make("early", early_concat="edge")
    assert enc.encoder.flat_dim == 16 * 2 * 4
    assert make("early", early_concat="channel").encoder.flat_dim == 16 * 2 * 2
    assert enc.encode(images(1), images(1, 1)).shape == (1, SPEC.embed_dim)


def test_early_stack3d_smoke_and_determinism():
    enc = make("early", early_concat="stack3d")
    v, g = images(2, 5), images(2, 6)
    a = enc.encode(v, g).data
    b = enc.encode(v, g).data
    np.testing.assert_array_equal(a, b)
    assert np.isfinite(a).all()
    assert a.shape == (2, SPEC.embed_dim)


def test_early_requires_joint_modeling():
    with pytest.raises(ConfigurationError):
        FusionConfig(mechanism="early", modeling="separate")
    with pytest.raises(ConfigurationError):
        FusionConfig(mechanism="mid", modeling="tied")
    with pytest.raises(ConfigurationError):
        FusionConfig(mechanism="late", modeling="joint")


# -- affine mapping ----------------------------------------------------------------

def test_fg_hr_mapping_preserves_resolution():
    rng = np.random.default_rng(0)
    for c, h, w in [(8, 16, 16), (16, 4, 4), (8, 7, 5)]:
        mapper = AffineMapper(c, "fg_hr", rng)
        z = Tensor(rng.random((2, c, h, w)).astype(np.float32))
        gamma, beta = map_affine(mapper, z)
        assert gamma.shape == (2, c, h, w) and beta.shape == (2, c, h, w)


def test_semantic_mapping_pools_to_channels():
    rng = np.random.default_rng(0)
    mapper = AffineMapper(8, "semantic", rng)
    z = Tensor(rng.random((3, 8, 9, 11)).astype(np.float32))
    gamma, beta = mapper(z)
    assert gamma.shape == (3, 8) and beta.shape == (3, 8)


def test_mapping_identity_at_init():
    rng = np.random.default_rng(0)
    for mode in ("fg_hr", "semantic"):
        mapper = AffineMapper(8, mode, rng)
        z = Tensor(rng.random((1, 8, 4, 4)).astype(np.float32))
        gamma, beta = mapper(z)
        assert (gamma.data == 1.0).all()
        assert (beta.data == 0.0).all()


# -- mid fusion ---------------------------------------------------------------------

@pytest.mark.parametrize("mapping", ["fg_hr", "semantic"])
@pytest.mark.parametrize("depth", [1, 2, 4])
def test_mid_identity_init_equals_unconditioned(depth, mapping):
    enc = make("mid", mid_depth=depth, mid_mapping=mapping)
    v, g = images(2, 7), images(2, 8)
    fused = enc.encode(v, g).data
    plain = enc.obs_encoder(Tensor(v)).data
    assert np.abs(fused - plain).max() < 1e-6


def test_mid_conditioning_is_live_after_randomization():
    enc = make("mid", mid_depth=2)
    rng = np.random.default_rng(9)
    for mapper in enc.mappers:
        for p in mapper.parameters().values():
            p.data = rng.standard_normal(p.shape).astype(np.float32) * 0.1
    v = images(1, 10)
    a = enc.encode(v, images(1, 11)).data
    b = enc.encode(v, images(1, 12)).data
    assert np.abs(a - b).max() > 1e-5


# -- skip fusion ---------------------------------------------------------------------

def test_skip_degenerate_matching_still_finite():
    enc = make("skip", skip_k=16)
    out = enc.encode(images(1), images(1, 1), zk=zk_all_pad())
    assert out.shape == (1, SPEC.embed_dim)
    assert np.isfinite(out.data).all()


def test_skip_self_match_vector_is_near_diagonal():
    rng = np.random.default_rng(2)
    base = rng.random((8, 8, 3)).astype(np.float32)
    img = np.kron(base, np.ones((8, 8, 1), dtype=np.float32))[:RES, :RES]
    det = kp.detect(img, 32)
    zk = kp.topk_flatten(kp.match(det, det), 16)
    populated = zk[zk != -1.0].reshape(-1, 4)
    assert len(populated) > 0
    np.testing.assert_allclose(populated[:, 0], populated[:, 2], atol=1e-6)
    np.testing.assert_allclose(populated[:, 1], populated[:, 3], atol=1e-6)
    enc = make("skip", skip_k=16)
    chw = np.ascontiguousarray(img.transpose(2, 0, 1))
    out = enc.encode(chw[None], chw[None], zk=zk[None])
    assert out.shape == (1, SPEC.embed_dim)


def test_skip_requires_zk():
    enc = make("skip")
    with pytest.raises(ConfigurationError):
        enc.encode(images(1), images(1, 1))


# -- eigencam ------------------------------------------------------------------------

def test_eigencam_recovers_rank1_spatial_factor():
    rng = np.random.default_rng(0)
    a = rng.standard_normal(8)
    b = rng.random((6, 6))
    z = (a[:, None, None] * b[None]).astype(np.float32)
    heat = eigencam(z)
    corr = np.corrcoef(heat.ravel(), b.ravel())[0, 1]
    assert corr > 0.999


def test_eigencam_constant_map_is_zero():
    z = np.full((4, 5, 5), 3.25, dtype=np.float32)
    np.testing.assert_array_equal(eigencam(z), np.zeros((5, 5), np.float32))


def test_eigencam_range():
    rng = np.random.default_rng(1)
    heat = eigencam(rng.standard_normal((8, 7, 7)).astype(np.float32))
    assert heat.min() >= 0.0 and heat.max() <= 1.0


# -- cross-mechanism invariants ---------------------------------------------------------

def test_all_mechanisms_share_embedding_dim():
    v, g = images(1, 20), images(1, 21)
    dims = set()
    for mech in ("late", "early", "mid", "skip"):
        enc = make(mech)
        zk = zk_all_pad() if enc.needs_keypoints else None
        dims.add(enc.encode(v, g, zk=zk).shape[1])
    assert dims == {SPEC.embed_dim}


def test_joint_early_model_smaller_than_separate_late():
    early = make("early", early_concat="channel")
    late = make("late", modeling="separate")
    assert early.num_parameters() < late.num_parameters()


def test_end_to_end_gradient_reaches_stem():
    v, g = images(2, 30), images(2, 31)
    for mech in ("late", "early", "mid", "skip"):
        enc = make(mech, seed=4)
        zk = zk_all_pad(n=2) if enc.needs_keypoints else None
        out = enc.encode(v, g, zk=zk)
        rng = np.random.default_rng(0)
        probe = Tensor(rng.standard_normal(out.shape).astype(np.float32))
        ops.sum_(ops.mul(out, probe)).backward()
        if mech == "early":
            stem_w = (enc.stem.w if hasattr(enc, "stem") else enc.encoder.trunk.stem.w)
        else:
            stem_w = enc.obs_encoder.trunk.stem.w
        assert stem_w.grad is not None
        assert np.abs(stem_w.grad).max() > 0.0


def test_encode_indexed_matches_encode():
    v = images(4, 40)
    goals = images(2, 41)
    idx = np.array([0, 1, 1, 0])
    for mech in ("late", "early", "mid", "skip"):
        enc = make(mech, seed=5)
        zk = zk_all_pad(n=4) if enc.needs_keypoints else None
        a = enc.encode_indexed(v, goals, idx, zk=zk).data
        b = enc.encode(v, goals[idx], zk=zk).data
        np.testing.assert_allclose(a, b, atol=1e-5)
