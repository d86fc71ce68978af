"""Vectorized environment stepping and rollout collection.

N environments run in lockstep inside the process (model forwards batch over
envs; numpy supplies the parallelism), each owning its pose, episode and
recurrent state. Episodes resample on termination; recurrent state and the
previous action reset with them.
"""

from dataclasses import dataclass, field

import numpy as np

from .. import keypoints as kp
from ..errors import SamplingError
from ..world import (Action, Camera, WorldCache, distance_field, render,
                     sample_episode, step, to_chw)
from ..policy import sample_action
from .rewards import RewardContext

_DETECT_POINTS = 64


class EpisodeSampler:
    """Draws fresh episodes across a world set and difficulty bands."""

    def __init__(self, world_seeds, bands, size_m, camera=Camera(), seed=0, cell_size=0.25):
        self.world_seeds = list(world_seeds)
        self.bands = [tuple(b) for b in bands]
        self.camera = camera
        self.worlds = WorldCache(size_m, cell_size)
        self.rng = np.random.default_rng(seed)
        self.next_id = 0
        self._feasible = {}

    def _feasible_bands(self, seed, grid):
        if seed not in self._feasible:
            free = np.argwhere(grid.free_mask)
            far = distance_field(grid, tuple(int(v) for v in free[0]))
            reach = float(far[np.isfinite(far)].max())
            bands = [b for b in self.bands if b[0] < reach] or [self.bands[0]]
            self._feasible[seed] = bands
        return self._feasible[seed]

    def sample(self):
        for _ in range(16):
            seed = self.world_seeds[self.rng.integers(len(self.world_seeds))]
            grid = self.worlds.get(seed)
            bands = self._feasible_bands(seed, grid)
            band = bands[self.rng.integers(len(bands))]
            try:
                ep = sample_episode(grid, self.rng, band[0], band[1], world_seed=seed,
                                    episode_id=self.next_id, camera=self.camera)
            except SamplingError:
                continue
            self.next_id += 1
            return grid, ep
        raise SamplingError("episode sampler exhausted retries across worlds and bands")

    def state(self):
        return {"rng": self.rng.bit_generator.state, "next_id": self.next_id}

    def load_state(self, state):
        self.rng.bit_generator.state = state["rng"]
        self.next_id = int(state["next_id"])


@dataclass
class EnvRuntime:
    """Mutable per-environment state owned by one rollout slot."""

    grid: object = None
    episode: object = None
    ctx: object = None
    pose: object = None
    prev_action: int = -1
    steps: int = 0
    episode_return: float = 0.0
    goal_chw: np.ndarray = None
    goal_detections: object = None
    uid: int = -1
    _obs_cache: tuple = field(default=None, repr=False)

    def observe(self, camera):
        key = (self.pose, self.uid)
        if self._obs_cache is None or self._obs_cache[0] != key:
            img = render(self.grid, self.pose, camera.hfov_deg, camera.resolution)
            self._obs_cache = (key, img, to_chw(img))
        return self._obs_cache[1], self._obs_cache[2]


class VecNavEnv:
    """N synchronous environments with shaped rewards and episode recycling."""

    def __init__(self, n_envs, sampler, reward_cfg, max_steps=500,
                 needs_keypoints=False, skip_k=16):
        self.n = n_envs
        self.sampler = sampler
        self.camera = sampler.camera
        self.reward_cfg = reward_cfg
        self.max_steps = max_steps
        self.needs_keypoints = needs_keypoints
        self.skip_k = skip_k
        self.envs = [EnvRuntime() for _ in range(n_envs)]
        for i in range(n_envs):
            self._begin_episode(i)

    def _begin_episode(self, i):
        grid, ep = self.sampler.sample()
        env = self.envs[i]
        env.grid, env.episode = grid, ep
        env.ctx = RewardContext(grid, ep, self.reward_cfg)
        env.pose = ep.start
        env.prev_action = -1
        env.steps = 0
        env.episode_return = 0.0
        env.goal_chw = to_chw(ep.goal_image)
        env.uid = ep.id
        env._obs_cache = None
        if self.needs_keypoints:
            env.goal_detections = kp.detect(ep.goal_image, _DETECT_POINTS)

    def observe_batch(self):
        obs = np.stack([env.observe(self.camera)[1] for env in self.envs])
        goals = np.stack([env.goal_chw for env in self.envs])
        zk = None
        if self.needs_keypoints:
            zk = np.stack([self._zk(env) for env in self.envs])
        return obs, goals, zk

    def _zk(self, env):
        hwc = env.observe(self.camera)[0]
        matches = kp.match(env.goal_detections, kp.detect(hwc, _DETECT_POINTS))
        return kp.topk_flatten(matches, self.skip_k)

    def prev_actions(self):
        return np.array([env.prev_action for env in self.envs], dtype=np.int64)

    def step_batch(self, actions):
        """Apply one action per env; returns (rewards, dones, infos)."""
        rewards = np.zeros(self.n, dtype=np.float64)
        dones = np.zeros(self.n, dtype=bool)
        infos = []
        for i, (env, action) in enumerate(zip(self.envs, actions)):
            action = Action(int(action))
            new_pose, collided = step(env.grid, env.pose, action)
            reward = env.ctx.compute(env.pose, new_pose, action)
            env.pose = new_pose
            env._obs_cache = None
            env.steps += 1
            env.episode_return += reward
            success = env.ctx.is_success(new_pose, action)
            done = action == Action.STOP or env.steps >= self.max_steps
            rewards[i] = reward
            dones[i] = done
            infos.append({"collided": collided, "success": success,
                          "episode_return": env.episode_return, "steps": env.steps})
            if done:
                self._begin_episode(i)
            else:
                env.prev_action = int(action)
        return rewards, dones, infos

    def runtime_state(self):
        out = []
        for env in self.envs:
            ep = env.episode
            out.append({
                "episode": {"id": ep.id, "world_seed": ep.world_seed,
                            "band": list(ep.band),
                            "start": {"x": ep.start.x, "y": ep.start.y, "theta": ep.start.theta},
                            "goal": {"x": ep.goal.x, "y": ep.goal.y, "theta": ep.goal.theta}},
                "pose": {"x": env.pose.x, "y": env.pose.y, "theta": env.pose.theta},
                "prev_action": env.prev_action,
                "steps": env.steps,
                "episode_return": env.episode_return,
            })
        return out

    def load_runtime_state(self, states):
        from ..world import Episode, Pose
        for env, st in zip(self.envs, states):
            rec = st["episode"]
            grid = self.sampler.worlds.get(rec["world_seed"])
            goal = Pose(**rec["goal"])
            goal_image = render(grid, goal, self.camera.hfov_deg, self.camera.resolution)
            start = Pose(**rec["start"])
            fld = distance_field(grid, grid.cell_of(goal.x, goal.y))
            ep = Episode(id=rec["id"], world_seed=rec["world_seed"], start=start, goal=goal,
                         goal_image=goal_image,
                         shortest_length=float(fld[grid.cell_of(start.x, start.y)]),
                         band=tuple(rec["band"]))
            env.grid, env.episode = grid, ep
            env.ctx = RewardContext(grid, ep, self.reward_cfg)
            env.pose = Pose(**st["pose"])
            env.prev_action = int(st["prev_action"])
            env.steps = int(st["steps"])
            env.episode_return = float(st["episode_return"])
            env.goal_chw = to_chw(goal_image)
            env.uid = ep.id
            env._obs_cache = None
            if self.needs_keypoints:
                env.goal_detections = kp.detect(goal_image, _DETECT_POINTS)


@dataclass
class RolloutBuffer:
    """T x N transition store feeding the PPO update."""

    obs: np.ndarray            # (T, N, 3, H, W) float32
    goal_uids: np.ndarray      # (T, N) int64
    goals: dict                # uid -> (3, H, W) float32
    zk: np.ndarray             # (T, N, 4k) float32 or None
    actions: np.ndarray        # (T, N) int64
    prev_actions: np.ndarray   # (T, N) int64, -1 at episode starts
    log_probs: np.ndarray      # (T, N) float32
    values: np.ndarray         # (T, N) float32
    rewards: np.ndarray        # (T, N) float64
    dones: np.ndarray          # (T, N) bool
    initial_hidden: np.ndarray  # (N, Dh) float32, state before step 0
    bootstrap: np.ndarray      # (N,) float32, value estimate past the window
    completed_returns: list    # returns of episodes that finished in-window
    completed_successes: list


def collect_rollouts(envs, model, hidden, t_len, action_rng):
    """Step every env t_len times under the current policy (graph-free).

    ``hidden`` is the (N, Dh) recurrent carry; the updated carry is returned
    alongside the filled buffer so training can continue seamlessly.
    """
    n = envs.n
    res = model.resolution
    obs = np.zeros((t_len, n, 3, res, res), dtype=np.float32)
    goal_uids = np.zeros((t_len, n), dtype=np.int64)
    goals = {}
    zk_store = None
    actions = np.zeros((t_len, n), dtype=np.int64)
    prev_actions = np.zeros((t_len, n), dtype=np.int64)
    log_probs = np.zeros((t_len, n), dtype=np.float32)
    values = np.zeros((t_len, n), dtype=np.float32)
    rewards = np.zeros((t_len, n), dtype=np.float64)
    dones = np.zeros((t_len, n), dtype=bool)
    completed_returns, completed_successes = [], []
    initial_hidden = hidden.copy()

    for t in range(t_len):
        obs_b, goals_b, zk_b = envs.observe_batch()
        for i, env in enumerate(envs.envs):
            if env.uid not in goals:
                goals[env.uid] = env.goal_chw
            goal_uids[t, i] = env.uid
        prev = envs.prev_actions()
        logits, vals, hidden = model.act_batch(obs_b, goals_b, prev, hidden, zk=zk_b)
        acts, logp = sample_action(logits, action_rng)
        rew, done, infos = envs.step_batch(acts)

        obs[t] = obs_b
        if zk_b is not None:
            if zk_store is None:
                zk_store = np.zeros((t_len, n, zk_b.shape[1]), dtype=np.float32)
            zk_store[t] = zk_b
        actions[t] = acts
        prev_actions[t] = prev
        log_probs[t] = logp.astype(np.float32)
        values[t] = vals
        rewards[t] = rew
        dones[t] = done
        for i, info in enumerate(infos):
            if done[i]:
                completed_returns.append(info["episode_return"])
                completed_successes.append(bool(info["success"]))
                hidden[i] = 0.0

    obs_b, goals_b, zk_b = envs.observe_batch()
    _, boot_vals, _ = model.act_batch(obs_b, goals_b, envs.prev_actions(), hidden, zk=zk_b)

    buffer = RolloutBuffer(obs=obs, goal_uids=goal_uids, goals=goals, zk=zk_store,
                           actions=actions, prev_actions=prev_actions,
                           log_probs=log_probs, values=values, rewards=rewards,
                           dones=dones, initial_hidden=initial_hidden,
                           bootstrap=boot_vals.astype(np.float32),
                           completed_returns=completed_returns,
                           completed_successes=completed_successes)
    return buffer, hidden
