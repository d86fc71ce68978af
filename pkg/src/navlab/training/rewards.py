"""Shaped navigation reward.

Per step: geodesic distance reduction toward the goal, an orientation-closure
bonus gated to fire only near the goal, a terminal success bonus when the
agent stops within the success radius, and a constant slack penalty. All
coefficients are configuration, since they reconstruct an unpublished recipe.
"""

import math
from dataclasses import dataclass

from ..world import Action, SUCCESS_RADIUS, angular_difference, distance_field


@dataclass(frozen=True)
class RewardConfig:
    distance_coef: float = 1.0    # weight on geodesic distance reduction
    angle_coef: float = 0.5       # weight on goal-heading closure
    success_bonus: float = 10.0   # terminal bonus for a successful STOP
    slack: float = 0.01           # constant per-step penalty
    angle_gate_m: float = 1.0     # closure bonus active within this geodesic range
    success_radius: float = SUCCESS_RADIUS


class RewardContext:
    """Per-episode reward state: the goal's distance field and heading."""

    def __init__(self, grid, episode, cfg=RewardConfig()):
        self.grid = grid
        self.goal = episode.goal
        self.cfg = cfg
        self.field = distance_field(grid, grid.cell_of(episode.goal.x, episode.goal.y))

    def distance_to_goal(self, pose):
        return float(self.field[self.grid.cell_of(pose.x, pose.y)])

    def euclidean_to_goal(self, pose):
        return math.hypot(pose.x - self.goal.x, pose.y - self.goal.y)

    def is_success(self, pose, action):
        return action == Action.STOP and self.euclidean_to_goal(pose) <= self.cfg.success_radius

    def compute(self, prev_pose, pose, action):
        cfg = self.cfg
        d_prev = self.distance_to_goal(prev_pose)
        d_now = self.distance_to_goal(pose)
        reward = cfg.distance_coef * (d_prev - d_now)
        if d_now < cfg.angle_gate_m:
            closure = (angular_difference(prev_pose.theta, self.goal.theta)
                       - angular_difference(pose.theta, self.goal.theta))
            reward += cfg.angle_coef * closure
        if self.is_success(pose, action):
            reward += cfg.success_bonus
        return reward - cfg.slack


def compute_reward(grid, episode, prev_pose, pose, action, cfg=RewardConfig()):
    """One-shot form of RewardContext.compute (context construction is cached
    through the shared distance-field cache)."""
    return RewardContext(grid, episode, cfg).compute(prev_pose, pose, action)
