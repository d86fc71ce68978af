"""Run configuration: a single YAML-backed tree with full defaulting.

Every constant the pipeline depends on appears here. The canonical JSON hash
of the resolved config is embedded in every artifact (checkpoints, metrics,
reports, panels) for provenance; resuming under a different hash is an error.
"""

import dataclasses
import hashlib
import json
import os
from dataclasses import dataclass, field, fields

import yaml

from .errors import ConfigurationError
from .fusion import BackboneSpec, FusionConfig
from .training.rewards import RewardConfig

OUT_ROOT_ENV = "NAVLAB_OUT_ROOT"


@dataclass(frozen=True)
class WorldConfig:
    size_m: float = 10.0
    cell_size: float = 0.25
    resolution: int = 64
    hfov_deg: float = 90.0

    def __post_init__(self):
        if self.size_m < 4.0:
            raise ConfigurationError(f"world.size_m must be at least 4.0, got {self.size_m}")
        if not 30.0 < self.hfov_deg < 150.0:
            raise ConfigurationError(f"world.hfov_deg must be in (30, 150), got {self.hfov_deg}")


@dataclass(frozen=True)
class TrainConfig:
    total_steps: int = 2_000_000
    rollout_t: int = 128
    n_envs: int = 8
    gamma: float = 0.99
    gae_lambda: float = 0.95
    clip_eps: float = 0.2
    epochs: int = 2
    minibatches: int = 2
    lr: float = 2.5e-4
    lr_decay: bool = True
    value_coef: float = 0.5
    entropy_coef: float = 0.01
    max_grad_norm: float = 0.5
    hidden_dim: int = 512
    n_train_worlds: int = 20
    n_heldout_worlds: int = 5
    bands: tuple = ((1.5, 3.0), (3.0, 5.0), (5.0, 8.0))
    max_episode_steps: int = 500
    probe_every: int = 10
    probe_episodes: int = 8
    checkpoint_every: int = 50

    def __post_init__(self):
        object.__setattr__(self, "bands", tuple(tuple(b) for b in self.bands))
        positives = ["total_steps", "rollout_t", "n_envs", "gamma", "gae_lambda",
                     "epochs", "minibatches", "lr", "value_coef", "entropy_coef",
                     "max_grad_norm", "hidden_dim", "n_train_worlds", "probe_every",
                     "probe_episodes", "checkpoint_every", "max_episode_steps"]
        for name in positives:
            if getattr(self, name) <= 0:
                raise ConfigurationError(f"train.{name} must be positive")
        if not 0.0 < self.clip_eps < 1.0:
            raise ConfigurationError(f"train.clip_eps must be in (0, 1), got {self.clip_eps}")
        if self.total_steps % (self.rollout_t * self.n_envs):
            raise ConfigurationError(
                f"train.total_steps={self.total_steps} must be a multiple of "
                f"rollout_t*n_envs={self.rollout_t * self.n_envs} (exact step accounting)")
        for band in self.bands:
            if len(band) != 2 or band[0] <= 1.0 or band[1] <= band[0]:
                raise ConfigurationError(f"invalid difficulty band {band}")

    @property
    def updates_total(self):
        return self.total_steps // (self.rollout_t * self.n_envs)


@dataclass(frozen=True)
class EvalConfig:
    max_steps: int = 500
    success_radius: float = 1.0
    greedy: bool = True
    # SPL treatment of blocked forward commands: the cited metric leaves it
    # unstated, so commanded-but-collided moves add 0 m unless enabled here.
    count_collided_forwards: bool = False
    episodes_file: str = ""


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    out_dir: str = "run"
    backbone: str = "default"  # "default" (paper-scale) or "tiny" (smoke tests)
    world_seed_base: int = -1  # -1: derive worlds from seed; else pin them (shared ablation sets)
    world: WorldConfig = field(default_factory=WorldConfig)
    fusion: FusionConfig = field(default_factory=FusionConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    reward: RewardConfig = field(default_factory=RewardConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)

    def __post_init__(self):
        if self.backbone not in ("default", "tiny"):
            raise ConfigurationError(f"backbone must be 'default' or 'tiny', got {self.backbone!r}")
        if self.train.n_train_worlds + self.train.n_heldout_worlds > 4000:
            raise ConfigurationError("world counts exceed the disjoint seed range")

    def backbone_spec(self):
        if self.backbone == "tiny":
            return BackboneSpec.tiny(embed_dim=self.fusion.embed_dim)
        return BackboneSpec(embed_dim=self.fusion.embed_dim)

    def _world_base(self):
        anchor = self.world_seed_base if self.world_seed_base >= 0 else self.seed
        return 10_000 * (anchor + 1)

    def train_world_seeds(self):
        return [self._world_base() + i for i in range(self.train.n_train_worlds)]

    def heldout_world_seeds(self):
        return [self._world_base() + 5_000 + i for i in range(self.train.n_heldout_worlds)]

    def resolved_out_dir(self):
        return os.path.join(os.environ.get(OUT_ROOT_ENV, "."), self.out_dir)


def to_dict(cfg):
    return dataclasses.asdict(cfg)


def config_hash(cfg):
    payload = json.dumps(to_dict(cfg), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:12]


_SECTIONS = {"world": WorldConfig, "fusion": FusionConfig, "train": TrainConfig,
             "reward": RewardConfig, "eval": EvalConfig}


def _build_section(cls, data, path):
    known = {f.name: f for f in fields(cls)}
    kwargs = {}
    for key, value in data.items():
        if key not in known:
            raise ConfigurationError(f"unknown config field {path}.{key}")
        kwargs[key] = value
    return cls(**kwargs)


def from_dict(data):
    data = dict(data or {})
    kwargs = {}
    for name, cls in _SECTIONS.items():
        section = data.pop(name, {})
        if not isinstance(section, dict):
            raise ConfigurationError(f"config section {name!r} must be a mapping")
        kwargs[name] = _build_section(cls, section, name)
    top_known = {f.name for f in fields(RunConfig)} - set(_SECTIONS)
    for key, value in data.items():
        if key not in top_known:
            raise ConfigurationError(f"unknown config field {key!r}")
        kwargs[key] = value
    return RunConfig(**kwargs)


def load_config(path=None, overrides=()):
    """Build a RunConfig from an optional YAML file plus KEY.PATH=value overrides."""
    data = {}
    if path:
        with open(path, encoding="utf-8") as f:
            data = yaml.safe_load(f) or {}
        if not isinstance(data, dict):
            raise ConfigurationError(f"{path}: config file must be a YAML mapping")
    for item in overrides:
        if "=" not in item:
            raise ConfigurationError(f"override {item!r} must look like section.key=value")
        key, _, raw = item.partition("=")
        value = yaml.safe_load(raw)
        node = data
        parts = key.strip().split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise ConfigurationError(f"override path {key!r} crosses a non-mapping")
        node[parts[-1]] = value
    return from_dict(data)


def save_config(cfg, path):
    with open(path, "w", encoding="utf-8") as f:
        yaml.safe_dump(to_dict(cfg), f, sort_keys=True)
