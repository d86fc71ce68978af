"""EigenCAM panel export: observation, goal, pre- and post-fusion saliency."""

import os

import numpy as np

from .. import keypoints as kp
from ..errors import UsageError
from ..fusion import MID, eigencam
from ..policy import sample_action
from ..world import Action, Camera, render, step, to_chw

_DETECT_POINTS = 64


def _cam_pair(collect, mechanism, depth):
    """Pick the two activation maps to visualize for one timestep."""
    if mechanism == MID:
        block = depth - 1  # deepest fused block
        pre = collect[f"block{block}.pre_film"].data[0]
        post = collect[f"block{block}.post_film"].data[0]
    else:
        pre = collect["block0.out"].data[0]
        post = collect["block3.out"].data[0]
    return eigencam(pre), eigencam(post)


def export_cam_panels(model, grid, episode, out_dir, timesteps, greedy=True,
                      rng=None, max_steps=500, config_hash=""):
    """Write one 4-tile panel per requested timestep while replaying the episode.

    Tiles: observation, goal image, pre-fusion CAM overlay, post-fusion CAM
    overlay (observation-encoder CAMs for non-FiLM mechanisms). Returns the
    written paths.
    """
    from .. import viz

    wanted = sorted(set(int(t) for t in timesteps))
    if wanted and wanted[0] < 0:
        raise UsageError(f"timesteps must be nonnegative, got {wanted[0]}")
    camera = Camera(resolution=model.resolution)
    mechanism = model.fusion_cfg.mechanism
    depth = getattr(model.encoder, "depth", 0)
    goal_chw = to_chw(episode.goal_image)[None]
    goal_det = kp.detect(episode.goal_image, _DETECT_POINTS) if model.needs_keypoints else None

    os.makedirs(out_dir, exist_ok=True)
    paths = []
    pose = episode.start
    hidden = model.policy.initial_state(1)
    prev = np.array([-1], dtype=np.int64)
    for t in range(max_steps):
        obs_hwc = render(grid, pose, camera.hfov_deg, camera.resolution)
        zk = None
        if goal_det is not None:
            matches = kp.match(goal_det, kp.detect(obs_hwc, _DETECT_POINTS))
            zk = kp.topk_flatten(matches, model.encoder.k)[None]
        collect = {} if t in wanted else None
        logits, _, hidden = model.act_batch(to_chw(obs_hwc)[None], goal_chw, prev,
                                            hidden, zk=zk, collect=collect)
        if collect is not None:
            cam_pre, cam_post = _cam_pair(collect, mechanism, depth)
            panel = viz.hstack([obs_hwc, episode.goal_image,
                                viz.overlay(obs_hwc, cam_pre),
                                viz.overlay(obs_hwc, cam_post)], pad=0)
            path = os.path.join(out_dir, f"cam_ep{episode.id:04d}_t{t:04d}.ppm")
            viz.write_ppm(path, panel, comment=f"config_hash={config_hash}")
            paths.append(path)
        action, _ = sample_action(logits[0], rng=rng, greedy=greedy)
        pose, _ = step(grid, pose, Action(action))
        prev = np.array([action], dtype=np.int64)
        if Action(action) == Action.STOP:
            episode_len = t + 1
            break
    else:
        episode_len = max_steps
    beyond = [t for t in wanted if t >= episode_len]
    if beyond:
        raise UsageError(f"timestep {beyond[0]} is beyond the episode length {episode_len}")
    return paths
