"""Procedural indoor worlds on an occupancy grid.

Worlds are rooms joined by corridors, carved out of solid rock, with every
wall cell carrying a palette color id in 3x3-cell segments so different
viewpoints are visually distinguishable.
"""

from collections import deque
from dataclasses import dataclass

import numpy as np

from ..errors import GenerationError

DEFAULT_CELL_SIZE = 0.25

# 12 wall colors, deliberately saturated and mutually distinct.
PALETTE = np.array([
    [0.85, 0.25, 0.25], [0.25, 0.60, 0.85], [0.30, 0.75, 0.35], [0.90, 0.75, 0.20],
    [0.70, 0.35, 0.80], [0.90, 0.50, 0.20], [0.25, 0.80, 0.75], [0.85, 0.40, 0.60],
    [0.55, 0.65, 0.25], [0.40, 0.45, 0.85], [0.65, 0.50, 0.35], [0.75, 0.75, 0.75],
], dtype=np.float32)

_SEGMENT_CELLS = 3


@dataclass(frozen=True, eq=False)
class OccupancyGrid:
    """Immutable discretized floorplan. cells[y, x] is True where occupied."""

    width: int
    height: int
    cell_size: float
    cells: np.ndarray
    palette: np.ndarray

    def __post_init__(self):
        self.cells.flags.writeable = False
        self.palette.flags.writeable = False

    def cell_of(self, x, y):
        return int(y / self.cell_size), int(x / self.cell_size)

    def center_of(self, cy, cx):
        return (cx + 0.5) * self.cell_size, (cy + 0.5) * self.cell_size

    def in_bounds(self, cy, cx):
        return 0 <= cy < self.height and 0 <= cx < self.width

    def is_free_cell(self, cy, cx):
        return self.in_bounds(cy, cx) and not self.cells[cy, cx]

    def is_free_point(self, x, y):
        cy, cx = self.cell_of(x, y)
        return self.is_free_cell(cy, cx)

    @property
    def free_mask(self):
        return ~self.cells


def _carve_rooms_and_corridors(rng, n):
    occ = np.ones((n, n), dtype=bool)
    n_rooms = int(rng.integers(4, 9))
    centers = []
    max_side = max(4, n // 3)
    for _ in range(n_rooms):
        w = int(rng.integers(3, max_side))
        h = int(rng.integers(3, max_side))
        x0 = int(rng.integers(1, max(2, n - 1 - w)))
        y0 = int(rng.integers(1, max(2, n - 1 - h)))
        occ[y0:y0 + h, x0:x0 + w] = False
        centers.append((y0 + h // 2, x0 + w // 2))
    pairs = list(zip(centers[:-1], centers[1:]))
    if len(centers) > 2:
        pairs.append((centers[-1], centers[0]))
    for (y1, x1), (y2, x2) in pairs:
        wide = int(rng.integers(1, 3))
        if rng.integers(2):
            occ[y1:y1 + wide, min(x1, x2):max(x1, x2) + 1] = False
            occ[min(y1, y2):max(y1, y2) + 1, x2:x2 + wide] = False
        else:
            occ[min(y1, y2):max(y1, y2) + 1, x1:x1 + wide] = False
            occ[y2:y2 + wide, min(x1, x2):max(x1, x2) + 1] = False
    occ[0, :] = occ[-1, :] = True
    occ[:, 0] = occ[:, -1] = True
    return occ


def _keep_largest_component(occ):
    """Occupy every free cell outside the largest 4-connected free region."""
    free = ~occ
    labels = np.zeros(occ.shape, dtype=np.int32)
    sizes = {}
    next_label = 0
    for sy, sx in zip(*np.nonzero(free)):
        if labels[sy, sx]:
            continue
        next_label += 1
        queue = deque([(sy, sx)])
        labels[sy, sx] = next_label
        count = 0
        while queue:
            y, x = queue.popleft()
            count += 1
            for ny, nx in ((y - 1, x), (y + 1, x), (y, x - 1), (y, x + 1)):
                if free[ny, nx] and not labels[ny, nx]:
                    labels[ny, nx] = next_label
                    queue.append((ny, nx))
        sizes[next_label] = count
    if not sizes:
        return occ, 0
    best = max(sizes, key=lambda k: (sizes[k], -k))
    occ = occ | (labels != best)
    return occ, sizes[best]


def generate_world(seed, size_m, cell_size=DEFAULT_CELL_SIZE):
    """Deterministically generate a connected world of roughly size_m meters."""
    if size_m < 4.0:
        raise GenerationError(f"size_m must be at least 4.0, got {size_m}")
    n = int(round(size_m / cell_size))
    for attempt in range(32):
        rng = np.random.default_rng([int(seed) & 0xFFFFFFFF, attempt, 0x9E3779B9])
        occ = _carve_rooms_and_corridors(rng, n)
        occ, largest = _keep_largest_component(occ)
        if largest < 0.15 * n * n:
            continue
        block = rng.integers(0, len(PALETTE), size=(n // _SEGMENT_CELLS + 1,
                                                    n // _SEGMENT_CELLS + 1))
        ys, xs = np.mgrid[0:n, 0:n]
        palette = block[ys // _SEGMENT_CELLS, xs // _SEGMENT_CELLS].astype(np.int16)
        return OccupancyGrid(width=n, height=n, cell_size=float(cell_size),
                             cells=occ, palette=palette)
    raise GenerationError(f"world generation failed connectivity for seed={seed}, size={size_m}")
