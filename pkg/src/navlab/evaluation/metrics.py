"""Running episodes under a trained model and aggregating SR / SPL."""

import math
from dataclasses import dataclass

import numpy as np

from .. import keypoints as kp
from ..errors import UsageError
from ..policy import sample_action
from ..world import Action, Camera, FORWARD_STEP, render, step, to_chw

_DETECT_POINTS = 64


@dataclass(frozen=True)
class EpisodeResult:
    episode_id: int
    band: tuple
    success: bool
    steps: int
    path_length: float      # meters actually traveled (collided moves add 0)
    shortest_length: float  # the episode's geodesic start-goal length
    final_distance: float   # Euclidean meters from goal at termination


def run_episode(grid, episode, model, greedy=True, max_steps=500, rng=None,
                success_radius=1.0, trace=None, count_collided_forwards=False):
    """Roll one episode. Success requires an explicit STOP within the radius.

    Path length counts executed forward moves; blocked (collided) forwards add
    0 m unless ``count_collided_forwards`` is set. Pass a list as ``trace`` to
    receive the visited poses.
    """
    camera = Camera(resolution=model.resolution)
    pose = episode.start
    hidden = model.policy.initial_state(1)
    prev = np.array([-1], dtype=np.int64)
    goal_chw = to_chw(episode.goal_image)[None]
    goal_det = kp.detect(episode.goal_image, _DETECT_POINTS) if model.needs_keypoints else None
    path_length = 0.0
    steps = 0
    success = False
    if trace is not None:
        trace.append(pose)
    while steps < max_steps:
        obs_hwc = render(grid, pose, camera.hfov_deg, camera.resolution)
        zk = None
        if goal_det is not None:
            matches = kp.match(goal_det, kp.detect(obs_hwc, _DETECT_POINTS))
            zk = kp.topk_flatten(matches, model.encoder.k)[None]
        logits, _, hidden = model.act_batch(to_chw(obs_hwc)[None], goal_chw, prev, hidden, zk=zk)
        action, _ = sample_action(logits[0], rng=rng, greedy=greedy)
        new_pose, collided = step(grid, pose, Action(action))
        steps += 1
        if Action(action) == Action.MOVE_FORWARD and (count_collided_forwards or not collided):
            path_length += FORWARD_STEP
        pose = new_pose
        prev = np.array([action], dtype=np.int64)
        if trace is not None:
            trace.append(pose)
        if Action(action) == Action.STOP:
            success = math.hypot(pose.x - episode.goal.x, pose.y - episode.goal.y) <= success_radius
            break
    return EpisodeResult(
        episode_id=episode.id, band=episode.band, success=success, steps=steps,
        path_length=path_length, shortest_length=episode.shortest_length,
        final_distance=math.hypot(pose.x - episode.goal.x, pose.y - episode.goal.y))


def success_rate(results):
    if not results:
        raise UsageError("success_rate of an empty result set is undefined")
    return float(np.mean([r.success for r in results]))


def spl(results):
    """Success weighted by path length: mean of S * l / max(p, l)."""
    if not results:
        raise UsageError("SPL of an empty result set is undefined")
    total = 0.0
    for r in results:
        if r.shortest_length <= 0:
            raise UsageError(f"episode {r.episode_id} has non-positive shortest length")
        if r.success:
            total += r.shortest_length / max(r.path_length, r.shortest_length)
    return total / len(results)


def evaluate_episodes(pairs, model, greedy=True, max_steps=500, rng=None,
                      success_radius=1.0, count_collided_forwards=False):
    """Run (grid, episode) pairs and aggregate overall and per-band metrics."""
    results = [run_episode(grid, ep, model, greedy=greedy, max_steps=max_steps,
                           rng=rng, success_radius=success_radius,
                           count_collided_forwards=count_collided_forwards)
               for grid, ep in pairs]
    report = {
        "overall": _aggregate(results),
        "bands": {},
        "episodes": [vars(r) | {"band": list(r.band)} for r in results],
    }
    for band in sorted({r.band for r in results}):
        subset = [r for r in results if r.band == band]
        report["bands"][f"{band[0]:g}-{band[1]:g}"] = _aggregate(subset)
    return report, results


def _aggregate(results):
    return {"episodes": len(results), "sr": success_rate(results), "spl": spl(results)}
