"""Procedural worlds: generation, rendering, kinematics, distances, episodes."""

from .episodes import SUCCESS_RADIUS, Episode, WorldCache, load_episodes, sample_episode, save_episodes
from .geodesic import distance_field, geodesic_distance
from .grid import DEFAULT_CELL_SIZE, PALETTE, OccupancyGrid, generate_world
from .kinematics import (Action, FORWARD_STEP, N_HEADINGS, TURN_STEP, Pose,
                         angular_difference, heading_index, lattice_theta, step)
from .planner import oracle_actions, path_to_actions, shortest_cell_path
from .raycast import Camera, render, to_chw

__all__ = [
    "Action", "Camera", "DEFAULT_CELL_SIZE", "Episode", "FORWARD_STEP",
    "N_HEADINGS", "OccupancyGrid", "PALETTE", "Pose", "SUCCESS_RADIUS",
    "TURN_STEP", "WorldCache", "angular_difference", "distance_field",
    "generate_world", "geodesic_distance", "heading_index", "lattice_theta",
    "load_episodes", "oracle_actions", "path_to_actions", "render",
    "sample_episode", "save_episodes", "shortest_cell_path", "step", "to_chw",
]
