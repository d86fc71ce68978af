"""Image export (binary PPM) and small drawing helpers for panels and maps."""

import numpy as np

from .errors import ConfigurationError
from .world.grid import PALETTE


def write_ppm(path, image, comment=""):
    """Write a float [0,1] (H, W, 3) image as a binary P6 portable pixmap."""
    arr = np.clip(np.asarray(image, dtype=np.float64), 0.0, 1.0)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise ConfigurationError(f"PPM export needs an (H, W, 3) image, got {arr.shape}")
    h, w, _ = arr.shape
    data = (arr * 255.0 + 0.5).astype(np.uint8)
    with open(path, "wb") as f:
        f.write(b"P6\n")
        if comment:
            f.write(f"# {comment}\n".encode("ascii"))
        f.write(f"{w} {h}\n255\n".encode("ascii"))
        f.write(data.tobytes())


def read_ppm(path):
    """Read back a P6 file written by write_ppm; returns (image, comment)."""
    with open(path, "rb") as f:
        blob = f.read()
    if not blob.startswith(b"P6"):
        raise ConfigurationError(f"{path}: not a P6 pixmap")
    comment = ""
    fields = []
    pos = 2
    while len(fields) < 3:
        while pos < len(blob) and blob[pos:pos + 1].isspace():
            pos += 1
        if blob[pos:pos + 1] == b"#":
            end = blob.index(b"\n", pos)
            comment = blob[pos + 1:end].decode("ascii").strip()
            pos = end + 1
            continue
        end = pos
        while not blob[end:end + 1].isspace():
            end += 1
        fields.append(int(blob[pos:end]))
        pos = end
    pos += 1  # single whitespace after maxval
    w, h, _ = fields
    img = np.frombuffer(blob[pos:pos + w * h * 3], dtype=np.uint8).reshape(h, w, 3)
    return img.astype(np.float32) / 255.0, comment


def colormap(heat):
    """Blue-to-red ramp for a heatmap in [0, 1]."""
    h = np.clip(np.asarray(heat, dtype=np.float32), 0.0, 1.0)
    r = np.clip(1.5 * h - 0.25, 0, 1)
    g = 1.0 - np.abs(2.0 * h - 1.0)
    b = np.clip(1.25 - 1.5 * h, 0, 1)
    return np.stack([r, g, b], axis=-1)


def upsample_nearest(a, out_hw):
    oh, ow = out_hw
    ys = (np.arange(oh) * a.shape[0]) // oh
    xs = (np.arange(ow) * a.shape[1]) // ow
    return a[ys][:, xs]


def overlay(image, heat, alpha=0.5):
    """Blend a heatmap (any resolution) over an (H, W, 3) image."""
    hm = upsample_nearest(heat, image.shape[:2])
    return (1.0 - alpha) * image + alpha * colormap(hm)


def hstack(tiles, pad=2):
    """Horizontally tile equal-height images with a thin separator."""
    h = tiles[0].shape[0]
    sep = np.ones((h, pad, 3), dtype=np.float32)
    row = []
    for i, tile in enumerate(tiles):
        if i:
            row.append(sep)
        row.append(tile.astype(np.float32))
    return np.concatenate(row, axis=1)


def draw_line(img, y0, x0, y1, x1, color):
    """Bresenham line; coordinates clipped to the image."""
    h, w, _ = img.shape
    y0, x0, y1, x1 = int(y0), int(x0), int(y1), int(x1)
    dy, dx = abs(y1 - y0), abs(x1 - x0)
    sy = 1 if y0 < y1 else -1
    sx = 1 if x0 < x1 else -1
    err = dx - dy
    while True:
        if 0 <= y0 < h and 0 <= x0 < w:
            img[y0, x0] = color
        if y0 == y1 and x0 == x1:
            break
        e2 = 2 * err
        if e2 > -dy:
            err -= dy
            x0 += sx
        if e2 < dx:
            err += dx
            y0 += sy


def draw_disc(img, y, x, radius, color):
    h, w, _ = img.shape
    yy, xx = np.mgrid[max(0, y - radius):min(h, y + radius + 1),
                      max(0, x - radius):min(w, x + radius + 1)]
    mask = (yy - y) ** 2 + (xx - x) ** 2 <= radius * radius
    img[yy[mask], xx[mask]] = color


START_COLOR = np.array([0.1, 0.9, 0.2], dtype=np.float32)
GOAL_COLOR = np.array([0.95, 0.15, 0.15], dtype=np.float32)
PATH_COLOR = np.array([0.15, 0.35, 0.95], dtype=np.float32)


def trajectory_map(grid, poses, goal=None, scale=8):
    """Top-down view: palette-colored walls, the agent path polyline, a start
    marker (green) and a goal marker (red)."""
    occ = grid.cells
    base = np.where(occ[:, :, None], PALETTE[grid.palette] * 0.6,
                    np.full(3, 0.92, dtype=np.float32))
    img = np.repeat(np.repeat(base, scale, axis=0), scale, axis=1).astype(np.float32)

    def to_px(pose):
        return int(pose.y / grid.cell_size * scale), int(pose.x / grid.cell_size * scale)

    pts = [to_px(p) for p in poses]
    for (y0, x0), (y1, x1) in zip(pts[:-1], pts[1:]):
        draw_line(img, y0, x0, y1, x1, PATH_COLOR)
    if goal is not None:
        draw_disc(img, *to_px(goal), max(2, scale // 3), GOAL_COLOR)
    if pts:
        draw_disc(img, *pts[0], max(2, scale // 3), START_COLOR)
    return img


def match_panel(img_a, img_b, matches, max_lines=32):
    """Side-by-side keypoint-match visualization."""
    panel = hstack([img_a, img_b], pad=2)
    offset = img_a.shape[1] + 2
    for x, y, x2, y2, score in matches.pairs[:max_lines]:
        color = np.array([0.1 + 0.9 * score, 0.9 * score, 0.2], dtype=np.float32)
        draw_line(panel, y, x, y2, x2 + offset, color)
    return panel
