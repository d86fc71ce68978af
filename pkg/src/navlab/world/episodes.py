"""Episode sampling and line-delimited JSON episode sets.

An episode pins a start pose, a goal pose with its rendered goal image, and
the geodesic start-goal length. Files store only poses and seeds; goal images
are re-rendered on load.
"""

import json
from dataclasses import dataclass

import numpy as np

from ..errors import ConfigurationError, SamplingError
from .geodesic import distance_field
from .grid import DEFAULT_CELL_SIZE, generate_world
from .kinematics import Pose, lattice_theta
from .raycast import Camera, render

SUCCESS_RADIUS = 1.0  # meters; also the floor for episode difficulty


@dataclass(frozen=True)
class Episode:
    id: int
    world_seed: int
    start: Pose
    goal: Pose
    goal_image: np.ndarray
    shortest_length: float
    band: tuple


def sample_episode(grid, rng, min_d, max_d, *, world_seed=0, episode_id=0,
                   camera=Camera(), max_tries=64):
    """Draw start/goal cell-center poses whose geodesic distance is in band.

    Headings are sampled uniformly over the 12 lattice directions so the goal
    orientation is reachable by 30-degree turns.
    """
    if min_d <= SUCCESS_RADIUS:
        raise ConfigurationError(f"min_d must exceed the success radius {SUCCESS_RADIUS}, got {min_d}")
    if max_d <= min_d:
        raise ConfigurationError(f"max_d must exceed min_d, got [{min_d}, {max_d}]")
    free_cells = np.argwhere(grid.free_mask)
    for _ in range(max_tries):
        gy, gx = free_cells[rng.integers(len(free_cells))]
        field = distance_field(grid, (int(gy), int(gx)))
        mask = (field >= min_d) & (field <= max_d) & grid.free_mask
        candidates = np.argwhere(mask)
        if len(candidates) == 0:
            continue
        sy, sx = candidates[rng.integers(len(candidates))]
        sx_m, sy_m = grid.center_of(int(sy), int(sx))
        gx_m, gy_m = grid.center_of(int(gy), int(gx))
        start = Pose(sx_m, sy_m, lattice_theta(int(rng.integers(12))))
        goal = Pose(gx_m, gy_m, lattice_theta(int(rng.integers(12))))
        goal_image = render(grid, goal, camera.hfov_deg, camera.resolution)
        return Episode(id=int(episode_id), world_seed=int(world_seed), start=start,
                       goal=goal, goal_image=goal_image,
                       shortest_length=float(field[sy, sx]),
                       band=(float(min_d), float(max_d)))
    raise SamplingError(f"no start/goal pair with geodesic distance in [{min_d}, {max_d}] "
                        f"after {max_tries} tries (world_seed={world_seed})")


def _pose_dict(p):
    return {"x": p.x, "y": p.y, "theta": p.theta}


def episode_line(ep):
    return json.dumps({
        "id": ep.id,
        "world_seed": ep.world_seed,
        "start": _pose_dict(ep.start),
        "goal": _pose_dict(ep.goal),
        "band": [ep.band[0], ep.band[1]],
    }, separators=(", ", ": "))


def save_episodes(path, episodes):
    with open(path, "w", encoding="utf-8") as f:
        for ep in episodes:
            f.write(episode_line(ep))
            f.write("\n")


class WorldCache:
    """Regenerates and memoizes worlds by seed; shared by loaders and samplers."""

    def __init__(self, size_m, cell_size=DEFAULT_CELL_SIZE):
        self.size_m = size_m
        self.cell_size = cell_size
        self._grids = {}

    def get(self, seed):
        if seed not in self._grids:
            self._grids[seed] = generate_world(seed, self.size_m, self.cell_size)
        return self._grids[seed]


def load_episodes(path, worlds, camera=Camera()):
    """Read an episode file, re-rendering goal images against cached worlds."""
    episodes = []
    with open(path, encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            grid = worlds.get(rec["world_seed"])
            start = Pose(**rec["start"])
            goal = Pose(**rec["goal"])
            field = distance_field(grid, grid.cell_of(goal.x, goal.y))
            episodes.append(Episode(
                id=rec["id"], world_seed=rec["world_seed"], start=start, goal=goal,
                goal_image=render(grid, goal, camera.hfov_deg, camera.resolution),
                shortest_length=float(field[grid.cell_of(start.x, start.y)]),
                band=tuple(rec["band"])))
    return episodes
