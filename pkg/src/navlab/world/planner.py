"""Grid path planning and conversion to discrete action macros.

Used by the solvability checks and the oracle path executor: paths are
4-connected (axis-aligned headings are reachable with 30-degree turns, 45s
are not) and each forward step traverses exactly one cell.
"""

from collections import deque

from ..errors import UsageError
from .kinematics import Action, N_HEADINGS, heading_index

# heading index per (dy, dx) cell step: 0 = +x, 3 = +y, 6 = -x, 9 = -y
_STEP_HEADING = {(0, 1): 0, (1, 0): 3, (0, -1): 6, (-1, 0): 9}


def shortest_cell_path(grid, start_cell, goal_cell):
    """Shortest 4-connected free-cell path, inclusive of both endpoints."""
    if not grid.is_free_cell(*start_cell) or not grid.is_free_cell(*goal_cell):
        raise UsageError("path endpoints must be free cells")
    if start_cell == goal_cell:
        return [start_cell]
    prev = {start_cell: None}
    queue = deque([start_cell])
    while queue:
        cell = queue.popleft()
        if cell == goal_cell:
            break
        y, x = cell
        for ny, nx in ((y - 1, x), (y + 1, x), (y, x - 1), (y, x + 1)):
            if grid.is_free_cell(ny, nx) and (ny, nx) not in prev:
                prev[(ny, nx)] = cell
                queue.append((ny, nx))
    if goal_cell not in prev:
        return None
    path = [goal_cell]
    while prev[path[-1]] is not None:
        path.append(prev[path[-1]])
    path.reverse()
    return path


def turns_toward(current_heading, target_heading):
    """Minimal turn sequence rotating one lattice heading onto another."""
    delta = (target_heading - current_heading) % N_HEADINGS
    if delta <= N_HEADINGS // 2:
        return [Action.TURN_LEFT] * delta
    return [Action.TURN_RIGHT] * (N_HEADINGS - delta)


def path_to_actions(start_theta, path):
    """Expand a cell path into turn/forward macros, terminated by STOP."""
    actions = []
    heading = heading_index(start_theta)
    for (y0, x0), (y1, x1) in zip(path[:-1], path[1:]):
        target = _STEP_HEADING[(y1 - y0, x1 - x0)]
        actions.extend(turns_toward(heading, target))
        heading = target
        actions.append(Action.MOVE_FORWARD)
    actions.append(Action.STOP)
    return actions


def oracle_actions(grid, start_pose, goal_pose):
    """Shortest-path action script from a start pose to the goal cell."""
    path = shortest_cell_path(grid, grid.cell_of(start_pose.x, start_pose.y),
                              grid.cell_of(goal_pose.x, goal_pose.y))
    if path is None:
        return None
    return path_to_actions(start_pose.theta, path)
