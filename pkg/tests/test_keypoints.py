"""Keypoint detection, matching and top-k flattening tests."""

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from navlab.keypoints import DEFAULT_TOP_K, MatchSet, detect, match, topk_flatten


def square_image(n=64, lo=8, hi=40, value=1.0):
    img = np.full((n, n, 3), 0.2, dtype=np.float32)
    img[lo:hi, lo:hi] = value
    return img


def noisy_texture(seed, n=64):
    rng = np.random.default_rng(seed)
    base = rng.random((n // 4, n // 4, 3)).astype(np.float32)
    return np.clip(np.kron(base, np.ones((4, 4, 1), dtype=np.float32)), 0, 1)


def test_uniform_image_has_no_keypoints():
    img = np.full((64, 64, 3), 0.5, dtype=np.float32)
    assert len(detect(img, 32)) == 0


def test_high_contrast_square_corners():
    det = detect(square_image(), 16)
    corners = [(8, 8), (8, 39), (39, 8), (39, 39)]
    found = 0
    for cx, cy in corners:
        if any(abs(k.x - cx) <= 2 and abs(k.y - cy) <= 2 for k in det.keypoints):
            found += 1
    assert found == 4


def test_descriptors_unit_norm():
    det = detect(noisy_texture(0), 48)
    assert len(det) > 0
    norms = np.linalg.norm(det.descriptors, axis=1)
    np.testing.assert_allclose(norms, 1.0, atol=1e-5)


def test_self_match_scores():
    det = detect(noisy_texture(1), 32)
    ms = match(det, det)
    assert len(ms) == len(det)
    for x, y, x2, y2, s in ms.pairs:
        assert (x, y) == (x2, y2)
        assert s >= 1.0 - 1e-5


def test_translation_match():
    img = noisy_texture(2)
    shifted = np.roll(img, 5, axis=1)  # translate 5 px along x
    da, db = detect(img, 48), detect(shifted, 48)
    ms = match(da, db)
    assert len(ms) >= 5
    good = sum(1 for x, y, x2, y2, _ in ms.pairs
               if abs(((x2 - x) + 32) % 64 - 32 - 5) <= 1 and abs(y2 - y) <= 1)
    assert good / len(ms) >= 0.8


def test_textured_vs_uniform_is_empty():
    ms = match(detect(noisy_texture(3), 32),
               detect(np.full((64, 64, 3), 0.5, np.float32), 32))
    assert len(ms) == 0


def test_match_cardinality_symmetry():
    a, b = detect(noisy_texture(4), 32), detect(noisy_texture(5), 32)
    assert len(match(a, b)) == len(match(b, a))


def test_match_is_one_to_one():
    a, b = detect(noisy_texture(6), 48), detect(noisy_texture(6, 64), 48)
    ms = match(a, b)
    src = [(x, y) for x, y, *_ in ms.pairs]
    dst = [(x2, y2) for _, _, x2, y2, _ in ms.pairs]
    assert len(set(src)) == len(src)
    assert len(set(dst)) == len(dst)


def test_topk_empty_padding():
    out = topk_flatten(MatchSet((), 64, 64), 8)
    assert out.shape == (32,)
    assert (out == -1.0).all()


def test_topk_partial_fill():
    pairs = tuple((float(i), float(i), float(i), float(i), 1.0 - 0.1 * i) for i in range(3))
    out = topk_flatten(MatchSet(pairs, 64, 64), 8)
    assert out.shape == (32,)
    assert (out[:12] >= 0).all()
    assert (out[12:] == -1.0).all()


def test_topk_normalization_center_pixel():
    ms = MatchSet(((32.0, 32.0, 32.0, 32.0, 1.0),), 64, 64)
    np.testing.assert_allclose(topk_flatten(ms, 1), [0.5, 0.5, 0.5, 0.5])


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 40), st.integers(1, DEFAULT_TOP_K * 2))
def test_topk_length_and_value_ranges(n_pairs, k):
    rng = np.random.default_rng(n_pairs * 131 + k)
    pairs = tuple((float(rng.integers(0, 64)), float(rng.integers(0, 64)),
                   float(rng.integers(0, 64)), float(rng.integers(0, 64)),
                   float(rng.random())) for _ in range(n_pairs))
    out = topk_flatten(MatchSet(pairs, 64, 64), k)
    assert out.shape == (4 * k,)
    populated = out[out != -1.0]
    assert ((populated >= 0.0) & (populated <= 1.0)).all()
    # the two regimes are separable by sign
    assert ((out == -1.0) | (out >= 0.0)).all()
