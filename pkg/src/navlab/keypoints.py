"""Classical keypoint pipeline for skip fusion: Harris corners, normalized
8x8 patch descriptors, mutual-nearest-neighbor matching, and the flattened
top-k coordinate vector the encoder consumes (-1 padded)."""

from dataclasses import dataclass

import numpy as np

PATCH = 8
NMS_RADIUS = 5.0
HARRIS_K = 0.05
RATIO_TEST = 0.9
DEFAULT_TOP_K = 16

_LUMA = np.array([0.299, 0.587, 0.114], dtype=np.float32)


@dataclass(frozen=True)
class Keypoint:
    x: float
    y: float
    score: float


@dataclass(frozen=True)
class Detections:
    keypoints: tuple
    descriptors: np.ndarray  # (n, PATCH*PATCH), rows L2-normalized
    width: int
    height: int

    def __len__(self):
        return len(self.keypoints)


@dataclass(frozen=True)
class MatchSet:
    """Matched pairs (x, y, x', y', score) sorted by descending score."""

    pairs: tuple
    width: int
    height: int

    def __len__(self):
        return len(self.pairs)


def to_gray(image):
    return image.astype(np.float32) @ _LUMA


def _shift_diff(g):
    gp = np.pad(g, 1, mode="edge")
    ix = ((gp[1:-1, 2:] - gp[1:-1, :-2]) * 2.0
          + (gp[:-2, 2:] - gp[:-2, :-2]) + (gp[2:, 2:] - gp[2:, :-2])) * 0.125
    iy = ((gp[2:, 1:-1] - gp[:-2, 1:-1]) * 2.0
          + (gp[2:, 2:] - gp[:-2, 2:]) + (gp[2:, :-2] - gp[:-2, :-2])) * 0.125
    return ix, iy


def _box3(a):
    ap = np.pad(a, 1)
    out = np.zeros_like(a)
    for dy in range(3):
        for dx in range(3):
            out += ap[dy:dy + a.shape[0], dx:dx + a.shape[1]]
    return out


def harris_response(gray):
    ix, iy = _shift_diff(gray)
    sxx, syy, sxy = _box3(ix * ix), _box3(iy * iy), _box3(ix * iy)
    return (sxx * syy - sxy * sxy) - HARRIS_K * (sxx + syy) ** 2


def detect(image, max_points=64):
    """Harris keypoints with unit-norm grayscale patch descriptors.

    Non-maximum suppression keeps the strongest response within a 5-pixel
    radius; a featureless image yields an empty detection set.
    """
    gray = to_gray(image)
    h, w = gray.shape
    resp = harris_response(gray)
    margin = PATCH // 2
    threshold = max(1e-10, 0.01 * float(resp.max()))
    ys, xs = np.nonzero(resp > threshold)
    inside = (ys >= margin) & (ys < h - margin) & (xs >= margin) & (xs < w - margin)
    ys, xs = ys[inside], xs[inside]
    if len(ys) == 0:
        return Detections((), np.zeros((0, PATCH * PATCH), np.float32), w, h)
    scores = resp[ys, xs]
    order = np.lexsort((xs, ys, -scores))  # strongest first, deterministic ties
    order = order[:max_points * 8]

    kept = []
    r2 = NMS_RADIUS * NMS_RADIUS
    for idx in order:
        x, y = float(xs[idx]), float(ys[idx])
        if any((x - k[0]) ** 2 + (y - k[1]) ** 2 <= r2 for k in kept):
            continue
        kept.append((x, y, float(scores[idx])))
        if len(kept) >= max_points:
            break

    keypoints = []
    descriptors = []
    for x, y, s in kept:
        yy, xx = int(y), int(x)
        patch = gray[yy - margin + 1:yy + margin + 1, xx - margin + 1:xx + margin + 1]
        vec = patch.reshape(-1).astype(np.float32)
        vec = vec - vec.mean()
        norm = float(np.linalg.norm(vec))
        if norm < 1e-12:
            continue
        keypoints.append(Keypoint(x, y, s))
        descriptors.append(vec / norm)
    desc = np.array(descriptors, dtype=np.float32) if descriptors else \
        np.zeros((0, PATCH * PATCH), np.float32)
    return Detections(tuple(keypoints), desc, w, h)


def _ratio_ok(line, best_idx):
    """Lowe-style distance-ratio test along one similarity row/column."""
    if line.shape[0] < 2:
        return True
    s1 = float(line[best_idx])
    rest = np.delete(line, best_idx)
    d1, d2 = 1.0 - s1, 1.0 - float(rest.max())
    return d1 < 1e-12 or d1 < RATIO_TEST * d2


def match(a, b):
    """Mutual nearest neighbors under cosine similarity with a distance-ratio test.

    The ratio test is applied in both directions so the survivor set (and in
    particular its cardinality) is symmetric in the argument order.
    """
    if len(a) == 0 or len(b) == 0:
        return MatchSet((), a.width, a.height)
    sim = a.descriptors @ b.descriptors.T
    nn_ab = sim.argmax(axis=1)
    nn_ba = sim.argmax(axis=0)
    pairs = []
    for i, j in enumerate(nn_ab):
        j = int(j)
        if nn_ba[j] != i:
            continue
        if not (_ratio_ok(sim[i], j) and _ratio_ok(sim[:, j], i)):
            continue
        s1 = float(sim[i, j])
        ka, kb = a.keypoints[i], b.keypoints[j]
        pairs.append((ka.x, ka.y, kb.x, kb.y, min(max(s1, 0.0), 1.0)))
    pairs.sort(key=lambda p: (-p[4], p[0], p[1]))
    return MatchSet(tuple(pairs), a.width, a.height)


def topk_flatten(matches, k):
    """Flatten the top-k match coordinates, normalized to [0, 1]; pad with -1.

    Output is always exactly 4k long: (x1, y1, x1', y1', ..., xk, yk, xk', yk').
    """
    if k < 1:
        raise ValueError(f"k must be at least 1, got {k}")
    out = np.full(4 * k, -1.0, dtype=np.float32)
    w, h = float(matches.width), float(matches.height)
    for i, (x, y, x2, y2, _) in enumerate(matches.pairs[:k]):
        out[4 * i:4 * i + 4] = (x / w, y / h, x2 / w, y2 / h)
    return out
