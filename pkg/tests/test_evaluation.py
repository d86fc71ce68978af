"""Evaluation tests: episode runner, SR/SPL, CAM panels."""

import numpy as np
import pytest

from navlab.errors import UsageError
from navlab.evaluation import (EpisodeResult, evaluate_episodes, export_cam_panels,
                               run_episode, spl, success_rate)
from navlab.fusion import BackboneSpec, FusionConfig
from navlab.training import NavModel
from navlab.world import (Action, Camera, OccupancyGrid, Pose, generate_world,
                          oracle_actions, sample_episode)
from navlab.viz import read_ppm


class ScriptedModel:
    """Replays a fixed action list through the evaluation interface."""

    resolution = 32
    needs_keypoints = False
    fusion_cfg = FusionConfig(mechanism="late", embed_dim=32)

    def __init__(self, actions):
        self.actions = list(actions)
        self.i = 0

        class _P:
            @staticmethod
            def initial_state(n=1):
                return np.zeros((n, 4), dtype=np.float32)
        self.policy = _P()

    def act_batch(self, obs, goals, prev, hidden, zk=None, collect=None):
        logits = np.full((obs.shape[0], 4), -1e9, dtype=np.float32)
        action = self.actions[min(self.i, len(self.actions) - 1)]
        logits[:, int(action)] = 1e9
        self.i += 1
        return logits, np.zeros(obs.shape[0], np.float32), hidden


def corridor_grid(n=24, cell=0.25):
    occ = np.ones((n, n), dtype=bool)
    occ[2, 1:n - 1] = False  # one straight free row
    return OccupancyGrid(width=n, height=n, cell_size=cell, cells=occ,
                         palette=np.zeros((n, n), dtype=np.int16))


def result(success, p, l):
    return EpisodeResult(episode_id=0, band=(1.5, 3.0), success=success, steps=10,
                         path_length=p, shortest_length=l, final_distance=0.5)


def test_oracle_script_succeeds_with_near_optimal_path():
    grid = corridor_grid()
    rng = np.random.default_rng(0)
    ep = sample_episode(grid, rng, 1.5, 3.0, camera=Camera(resolution=32))
    model = ScriptedModel(oracle_actions(grid, ep.start, ep.goal))
    res = run_episode(grid, ep, model, greedy=True, max_steps=500)
    assert res.success
    assert res.final_distance <= 1.0
    # straight corridor: the executed path length matches the geodesic within a cell
    assert abs(res.path_length - res.shortest_length) <= grid.cell_size


def test_immediate_stop_fails_when_far():
    grid = corridor_grid()
    ep = sample_episode(grid, np.random.default_rng(1), 1.5, 3.0, camera=Camera(resolution=32))
    res = run_episode(grid, ep, ScriptedModel([Action.STOP]), max_steps=500)
    assert not res.success
    assert res.path_length == 0.0
    assert res.steps == 1


def test_never_stopping_hits_step_cap():
    grid = corridor_grid()
    ep = sample_episode(grid, np.random.default_rng(2), 1.5, 3.0, camera=Camera(resolution=32))
    res = run_episode(grid, ep, ScriptedModel([Action.TURN_LEFT]), max_steps=50)
    assert res.steps == 50
    assert not res.success


def test_success_rate_cases():
    assert success_rate([result(True, 1, 1)] * 4) == 1.0
    assert success_rate([result(False, 1, 1)] * 4) == 0.0
    rs = [result(True, 1, 1)] * 3 + [result(False, 1, 1)] * 7
    assert success_rate(rs) == pytest.approx(0.3)
    with pytest.raises(UsageError):
        success_rate([])


def test_spl_cases():
    assert spl([result(False, 3.0, 2.0)] * 3) == 0.0
    assert spl([result(True, 2.0, 2.0)]) == pytest.approx(1.0)
    assert spl([result(True, 4.0, 2.0), result(False, 1.0, 2.0)]) == pytest.approx(0.25)
    with pytest.raises(UsageError):
        spl([])
    with pytest.raises(UsageError):
        spl([result(True, 1.0, 0.0)])


def test_spl_never_exceeds_sr():
    rng = np.random.default_rng(0)
    for _ in range(20):
        rs = [result(bool(rng.integers(2)), float(rng.random() * 4 + 0.1),
                     float(rng.random() * 4 + 0.1)) for _ in range(12)]
        assert spl(rs) <= success_rate(rs) + 1e-12


def _tiny_model(mechanism="mid"):
    return NavModel(FusionConfig(mechanism=mechanism, embed_dim=32),
                    backbone=BackboneSpec.tiny(), resolution=32, hidden_dim=16, seed=3)


def test_cam_panels_layout_and_determinism(tmp_path):
    grid = generate_world(42, 8.0)
    ep = sample_episode(grid, np.random.default_rng(3), 1.5, 4.0,
                        camera=Camera(resolution=32), episode_id=9)
    model = _tiny_model("mid")
    paths = export_cam_panels(model, grid, ep, tmp_path / "a", [0, 2], max_steps=8,
                              config_hash="deadbeef0123")
    assert len(paths) == 2
    img, comment = read_ppm(paths[0])
    assert img.shape == (32, 4 * 32, 3)
    assert comment == "config_hash=deadbeef0123"
    assert img.min() >= 0.0 and img.max() <= 1.0
    paths_b = export_cam_panels(model, grid, ep, tmp_path / "b", [0, 2], max_steps=8,
                                config_hash="deadbeef0123")
    assert open(paths[0], "rb").read() == open(paths_b[0], "rb").read()


def test_cam_panels_work_for_non_mid_mechanisms(tmp_path):
    grid = generate_world(43, 8.0)
    ep = sample_episode(grid, np.random.default_rng(4), 1.5, 4.0,
                        camera=Camera(resolution=32), episode_id=1)
    paths = export_cam_panels(_tiny_model("early"), grid, ep, tmp_path, [0], max_steps=4)
    assert len(paths) == 1


def test_cam_panel_timestep_out_of_range(tmp_path):
    grid = corridor_grid()
    ep = sample_episode(grid, np.random.default_rng(5), 1.5, 3.0, camera=Camera(resolution=32))
    model = ScriptedModel([Action.STOP])
    model.fusion_cfg = FusionConfig(mechanism="late", embed_dim=32)
    with pytest.raises(UsageError):
        export_cam_panels(_tiny_model("mid"), grid, ep, tmp_path, [400], max_steps=6)


def test_greedy_run_is_deterministic():
    grid = generate_world(45, 8.0)
    ep = sample_episode(grid, np.random.default_rng(7), 1.5, 3.0,
                        camera=Camera(resolution=32), episode_id=2)
    model = _tiny_model("late")
    a = run_episode(grid, ep, model, greedy=True, max_steps=30)
    b = run_episode(grid, ep, model, greedy=True, max_steps=30)
    assert a == b


def test_path_length_dominates_displacement():
    import math
    grid = generate_world(46, 8.0)
    rng = np.random.default_rng(8)
    for i in range(5):
        ep = sample_episode(grid, rng, 1.5, 4.0, camera=Camera(resolution=32), episode_id=i)
        trace = []
        res = run_episode(grid, ep, _tiny_model("early"), greedy=True, max_steps=60,
                          trace=trace)
        start, last = trace[0], trace[-1]
        displacement = math.hypot(last.x - start.x, last.y - start.y)
        assert res.path_length >= displacement - grid.cell_size


def test_collided_forward_path_accounting():
    # agent facing the wall: forwards are blocked; the config flag decides
    # whether commanded-but-collided moves count into SPL's path length
    grid = corridor_grid()
    ep = sample_episode(grid, np.random.default_rng(9), 1.5, 3.0, camera=Camera(resolution=32))
    import dataclasses
    from navlab.world import Pose
    blocked = dataclasses.replace(ep, start=Pose(ep.start.x, ep.start.y, np.pi / 2))
    script = [Action.MOVE_FORWARD] * 3 + [Action.STOP]
    excl = run_episode(grid, blocked, ScriptedModel(script), max_steps=10)
    incl = run_episode(grid, blocked, ScriptedModel(script), max_steps=10,
                       count_collided_forwards=True)
    assert excl.path_length == 0.0
    assert incl.path_length == pytest.approx(0.75)


def test_evaluate_episodes_report_structure():
    grid = generate_world(44, 8.0)
    rng = np.random.default_rng(6)
    eps = [sample_episode(grid, rng, 1.5, 3.0, camera=Camera(resolution=32), episode_id=i)
           for i in range(3)]
    report, results = evaluate_episodes([(grid, e) for e in eps], _tiny_model("early"),
                                        max_steps=10)
    assert report["overall"]["episodes"] == 3
    assert "1.5-3" in report["bands"]
    assert report["overall"]["spl"] <= report["overall"]["sr"] + 1e-12
    assert len(results) == 3
