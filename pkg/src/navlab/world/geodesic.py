"""Geodesic (free-space shortest path) distances over the occupancy grid.

Distances are tracked as integer counts of straight and diagonal steps and
materialized canonically as ``straight + diag * sqrt(2)``. Canonical values
depend only on the step counts, not the traversal order, which makes
d(a, b) == d(b, a) hold exactly in floating point.
"""

import heapq
import math
from functools import lru_cache

import numpy as np

from ..errors import UsageError

SQRT2 = math.sqrt(2.0)

_MOVES = ((-1, 0, 0), (1, 0, 0), (0, -1, 0), (0, 1, 0),
          (-1, -1, 1), (-1, 1, 1), (1, -1, 1), (1, 1, 1))


def _key(straight, diag):
    return straight + diag * SQRT2


def _field_cells(grid, src):
    """Dijkstra flood from one cell; returns canonical distances in cell units."""
    h, w = grid.height, grid.width
    occ = grid.cells
    dist = np.full((h, w), np.inf)
    sy, sx = src
    dist[sy, sx] = 0.0
    heap = [(0.0, 0, 0, sy, sx)]  # (key, straight, diag, y, x)
    while heap:
        d, s, dg, y, x = heapq.heappop(heap)
        if d > dist[y, x]:
            continue
        for dy, dx, is_diag in _MOVES:
            ny, nx = y + dy, x + dx
            if 0 <= ny < h and 0 <= nx < w and not occ[ny, nx]:
                ns, ndg = s + 1 - is_diag, dg + is_diag
                nd = _key(ns, ndg)
                if nd < dist[ny, nx]:
                    dist[ny, nx] = nd
                    heapq.heappush(heap, (nd, ns, ndg, ny, nx))
    return dist


@lru_cache(maxsize=256)
def distance_field(grid, src_cell):
    """Geodesic distance in meters from every free cell to src_cell (read-only)."""
    field = _field_cells(grid, src_cell) * grid.cell_size
    field.flags.writeable = False
    return field


def geodesic_distance(grid, a, b):
    """Shortest traversable path length in meters between two poses."""
    ca = grid.cell_of(a.x, a.y)
    cb = grid.cell_of(b.x, b.y)
    if not grid.is_free_cell(*ca) or not grid.is_free_cell(*cb):
        raise UsageError("geodesic_distance endpoints must lie in free space")
    return float(distance_field(grid, cb)[ca])
