"""Agent pose and discrete motion primitives."""

import math
from dataclasses import dataclass
from enum import IntEnum


class Action(IntEnum):
    MOVE_FORWARD = 0
    TURN_LEFT = 1
    TURN_RIGHT = 2
    STOP = 3


FORWARD_STEP = 0.25          # meters per MOVE_FORWARD
TURN_STEP = math.pi / 6.0    # 30 degrees per turn
N_HEADINGS = 12
AGENT_CLEARANCE = 0.1        # meters of body clearance tested along forward moves
TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class Pose:
    x: float
    y: float
    theta: float  # radians in [0, 2*pi)


def heading_index(theta):
    """Nearest 30-degree lattice heading, as an index in [0, 12)."""
    return int(round(theta / TURN_STEP)) % N_HEADINGS


def lattice_theta(k):
    return (k % N_HEADINGS) * TURN_STEP


def angular_difference(a, b):
    """Absolute wrapped difference |a - b| in [0, pi]."""
    d = math.fmod(abs(a - b), TWO_PI)
    return min(d, TWO_PI - d)


def _disc_blocked(grid, x, y, radius):
    """True if a disc of the given radius around (x, y) touches any occupied cell."""
    cs = grid.cell_size
    cy0, cy1 = int((y - radius) / cs), int((y + radius) / cs)
    cx0, cx1 = int((x - radius) / cs), int((x + radius) / cs)
    r2 = radius * radius
    for cy in range(cy0, cy1 + 1):
        for cx in range(cx0, cx1 + 1):
            if not grid.in_bounds(cy, cx):
                return True
            if not grid.cells[cy, cx]:
                continue
            nx = min(max(x, cx * cs), (cx + 1) * cs)
            ny = min(max(y, cy * cs), (cy + 1) * cs)
            if (nx - x) ** 2 + (ny - y) ** 2 <= r2:
                return True
    return False


def step(grid, pose, action, clearance=AGENT_CLEARANCE):
    """Apply one discrete action. Forward motion is blocking: a move whose swept
    body disc would touch an occupied cell leaves the pose unchanged and reports
    a collision. Turns rotate exactly 30 degrees; STOP leaves the pose as is.
    """
    if action == Action.TURN_LEFT:
        return Pose(pose.x, pose.y, (pose.theta + TURN_STEP) % TWO_PI), False
    if action == Action.TURN_RIGHT:
        return Pose(pose.x, pose.y, (pose.theta - TURN_STEP) % TWO_PI), False
    if action == Action.STOP:
        return pose, False
    dx = FORWARD_STEP * math.cos(pose.theta)
    dy = FORWARD_STEP * math.sin(pose.theta)
    for i in range(1, 7):
        t = i / 6.0
        if _disc_blocked(grid, pose.x + t * dx, pose.y + t * dy, clearance):
            return pose, True
    return Pose(pose.x + dx, pose.y + dy, pose.theta), False
