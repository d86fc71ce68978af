"""Egocentric first-person rendering by per-column raycasting."""

import math
from dataclasses import dataclass

import numpy as np

from .. import _kernels
from ..errors import ConfigurationError, UsageError
from .grid import PALETTE

_CEILING = np.array([0.32, 0.34, 0.40], dtype=np.float32)
_FLOOR = np.array([0.24, 0.22, 0.20], dtype=np.float32)
_STRIPES_PER_CELL = 6.0
_SIDE_DIM = 0.85


@dataclass(frozen=True)
class Camera:
    resolution: int = 64
    hfov_deg: float = 90.0


def render(grid, pose, hfov_deg=90.0, resolution=64):
    """Render the agent's view as an (H, W, 3) float32 image in [0, 1].

    Walls are color-coded by palette segment, stripe-textured along their
    faces, and shaded by distance; floor and ceiling are vertical gradients.
    """
    if not 30.0 < hfov_deg < 150.0:
        raise ConfigurationError(f"hfov must be in (30, 150) degrees, got {hfov_deg}")
    if not grid.is_free_point(pose.x, pose.y):
        raise UsageError(f"camera pose ({pose.x:.2f}, {pose.y:.2f}) is not in free space")
    res = int(resolution)
    cs = grid.cell_size
    perp, wall_u, hit_x, hit_y, side = _kernels.raycast(
        grid.cells, pose.x / cs, pose.y / cs, pose.theta, math.radians(hfov_deg), res)

    dist_m = perp * cs
    shade = (1.0 / (1.0 + 0.35 * dist_m)).astype(np.float32)
    shade[side == 1] *= _SIDE_DIM
    pid = grid.palette[hit_y, hit_x]
    phase = ((hit_x * 3 + hit_y * 5 + pid * 7) % 8) / 8.0
    tex = np.where((wall_u * _STRIPES_PER_CELL + phase) % 1.0 < 0.5, 1.0, 0.72).astype(np.float32)
    wall_rgb = PALETTE[pid] * (shade * tex)[:, None]

    line = np.minimum(res, np.maximum(1, (res / np.maximum(perp, 1e-6)).astype(np.int64)))
    top = (res - line) // 2
    bottom = top + line
    rows = np.arange(res)
    wall_mask = (rows[:, None] >= top[None, :]) & (rows[:, None] < bottom[None, :])

    half = res // 2
    vertical = np.abs((rows + 0.5) / res - 0.5) * 2.0  # 0 at horizon, 1 at edges
    bg = np.empty((res, 3), dtype=np.float32)
    bg[:half] = _CEILING * (0.55 + 0.45 * vertical[:half, None])
    bg[half:] = _FLOOR * (0.45 + 0.75 * vertical[half:, None])

    img = np.where(wall_mask[:, :, None], wall_rgb[None, :, :], bg[:, None, :])
    return np.clip(img, 0.0, 1.0).astype(np.float32)


def to_chw(image):
    """(H, W, 3) image to the (3, H, W) float32 layout encoders consume."""
    return np.ascontiguousarray(image.transpose(2, 0, 1), dtype=np.float32)
