"""PPO training: rewards, advantage estimation, updates, rollouts, the loop."""

from .gae import gae, normalize_advantages
from .loop import build_model, load_model, probe_episode_set, train
from .model import NavModel
from .ppo import ppo_losses, ppo_update
from .rewards import RewardConfig, RewardContext, compute_reward
from .rollout import EpisodeSampler, RolloutBuffer, VecNavEnv, collect_rollouts

__all__ = [
    "EpisodeSampler", "NavModel", "RewardConfig", "RewardContext",
    "RolloutBuffer", "VecNavEnv", "build_model", "collect_rollouts",
    "compute_reward", "gae", "load_model", "normalize_advantages",
    "ppo_losses", "ppo_update", "probe_episode_set", "train",
]
