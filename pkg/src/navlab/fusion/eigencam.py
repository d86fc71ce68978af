"""Activation saliency by projection on the first principal component."""

import numpy as np


def eigencam(z):
    """Collapse a (C, H, W) activation map into an (H, W) heatmap in [0, 1].

    Rows of the (H*W) x C matrix are centered, projected onto the first right
    singular vector, and min-max normalized. The singular vector's sign is
    fixed so the projection of the raw (uncentered) rows has nonnegative sum.
    A constant map has zero variance and yields an all-zero heatmap.
    """
    c, h, w = z.shape
    raw = z.reshape(c, h * w).T.astype(np.float64)
    centered = raw - raw.mean(axis=0, keepdims=True)
    _, s, vt = np.linalg.svd(centered, full_matrices=False)
    if s.size == 0 or s[0] < 1e-12:
        return np.zeros((h, w), dtype=np.float32)
    v1 = vt[0]
    if float(np.sum(raw @ v1)) < 0.0:
        v1 = -v1
    proj = centered @ v1
    lo, hi = float(proj.min()), float(proj.max())
    if hi - lo < 1e-12:
        return np.zeros((h, w), dtype=np.float32)
    return ((proj - lo) / (hi - lo)).reshape(h, w).astype(np.float32)
