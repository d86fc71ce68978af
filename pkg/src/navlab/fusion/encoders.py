"""The encoder zoo: late, early, mid (FiLM) and skip (keypoint) fusion.

All four produce an embedding of the same dimension, so the policy is
mechanism-agnostic. `encode` takes (B, 3, H, W) float32 image batches;
`encode_indexed` additionally deduplicates goal images (goals repeat for
every step of an episode) and scatters the per-goal results back per step.
"""

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigurationError
from ..nd import Conv2d, Linear, Module, Tensor, ops
from .backbone import BackboneSpec, ImageEncoder, Trunk, TrunkBody, as_batch_tensor
from .film import FG_HR, MAPPINGS, AffineMapper

LATE, EARLY, MID, SKIP = "late", "early", "mid", "skip"
MECHANISMS = (LATE, EARLY, MID, SKIP)
CHANNEL, EDGE, STACK3D = "channel", "edge", "stack3d"
CONCAT_MODES = (STACK3D, EDGE, CHANNEL)
SEPARATE, TIED, JOINT = "separate", "tied", "joint"
MODELINGS = (SEPARATE, TIED, JOINT)

_SKIP_FC_DIM = 128


@dataclass(frozen=True)
class FusionConfig:
    mechanism: str = MID
    early_concat: str = CHANNEL
    mid_mapping: str = FG_HR
    mid_depth: int = 2
    skip_k: int = 16
    modeling: str = ""
    embed_dim: int = 512
    film_placement: str = "post_norm"

    def __post_init__(self):
        if self.mechanism not in MECHANISMS:
            raise ConfigurationError(f"unknown fusion mechanism {self.mechanism!r}; expected one of {MECHANISMS}")
        if self.early_concat not in CONCAT_MODES:
            raise ConfigurationError(f"unknown early_concat {self.early_concat!r}; expected one of {CONCAT_MODES}")
        if self.mid_mapping not in MAPPINGS:
            raise ConfigurationError(f"unknown mid_mapping {self.mid_mapping!r}; expected one of {MAPPINGS}")
        if self.mid_depth not in (1, 2, 4):
            raise ConfigurationError(f"mid_depth must be 1, 2 or 4, got {self.mid_depth}")
        if self.skip_k < 1:
            raise ConfigurationError(f"skip_k must be positive, got {self.skip_k}")
        if not self.modeling:
            object.__setattr__(self, "modeling", JOINT if self.mechanism == EARLY else SEPARATE)
        if self.modeling not in MODELINGS:
            raise ConfigurationError(f"unknown modeling {self.modeling!r}; expected one of {MODELINGS}")
        if self.mechanism == EARLY and self.modeling != JOINT:
            raise ConfigurationError("early fusion jointly models both images; set modeling=joint")
        if self.mechanism in (LATE, SKIP) and self.modeling == JOINT:
            raise ConfigurationError(f"{self.mechanism} fusion needs separate or tied encoders")
        if self.mechanism == MID and self.modeling != SEPARATE:
            raise ConfigurationError("mid fusion uses separate encoders with cross-connections")


class _TwoEncoderBase(Module):
    """Observation/goal encoder pair, independently initialized or tied."""

    def __init__(self, cfg, spec, resolution, rng):
        self.obs_encoder = ImageEncoder(spec, 3, (resolution, resolution), rng)
        if cfg.modeling == TIED:
            self.goal_encoder = self.obs_encoder
        else:
            self.goal_encoder = ImageEncoder(spec, 3, (resolution, resolution), rng)

    def _halves(self, obs_t, goal_t, collect=None):
        return self.obs_encoder(obs_t, collect=collect), self.goal_encoder(goal_t)


class LateFusionEncoder(_TwoEncoderBase):
    mechanism = LATE
    needs_keypoints = False

    def __init__(self, cfg, spec, resolution, rng):
        super().__init__(cfg, spec, resolution, rng)
        self.fuse = Linear(2 * spec.embed_dim, spec.embed_dim, rng=rng)

    def encode(self, obs, goal, zk=None, collect=None):
        eo, eg = self._halves(as_batch_tensor(obs), as_batch_tensor(goal), collect)
        return ops.relu(self.fuse(ops.concat([eo, eg], axis=1)))

    def encode_indexed(self, obs, goals, goal_idx, zk=None):
        eo = self.obs_encoder(as_batch_tensor(obs))
        eg = ops.index_select0(self.goal_encoder(as_batch_tensor(goals)), goal_idx)
        return ops.relu(self.fuse(ops.concat([eo, eg], axis=1)))


class EarlyFusionEncoder(Module):
    mechanism = EARLY
    needs_keypoints = False

    def __init__(self, cfg, spec, resolution, rng):
        self.concat_mode = cfg.early_concat
        if self.concat_mode == CHANNEL:
            self.encoder = ImageEncoder(spec, 6, (resolution, resolution), rng)
        elif self.concat_mode == EDGE:
            self.encoder = ImageEncoder(spec, 3, (resolution, 2 * resolution), rng)
        else:  # STACK3D: depth-1 3-D stem conv per depth slice, summed over depth
            self.stem = Conv2d(3, spec.stem_channels, spec.stem_kernel,
                               stride=spec.stem_stride, padding=spec.stem_kernel // 2, rng=rng)
            self.body = TrunkBody(spec, rng)
            fh, fw = spec.spatial_sizes(resolution, resolution)[-1]
            self.flat_dim = spec.blocks[-1][0] * fh * fw
            self.head = Linear(self.flat_dim, spec.embed_dim, rng=rng)
            self._stem_channels = spec.stem_channels

    def _stacked_forward(self, obs_t, goal_t, collect=None):
        a = ops.conv2d(obs_t, self.stem.w, self.stem.b, self.stem.stride, self.stem.padding)
        b = ops.conv2d(goal_t, self.stem.w,
                       Tensor(np.zeros(self._stem_channels, dtype=obs_t.dtype)),
                       self.stem.stride, self.stem.padding)
        h = self.body(ops.add(a, b), collect=collect)
        return ops.relu(self.head(ops.reshape(h, (h.shape[0], self.flat_dim))))

    def encode(self, obs, goal, zk=None, collect=None):
        obs = np.asarray(obs)
        goal = np.asarray(goal, dtype=obs.dtype)
        if self.concat_mode == CHANNEL:
            return self.encoder(as_batch_tensor(np.concatenate([obs, goal], axis=-3)), collect=collect)
        if self.concat_mode == EDGE:
            return self.encoder(as_batch_tensor(np.concatenate([obs, goal], axis=-1)), collect=collect)
        return self._stacked_forward(as_batch_tensor(obs), as_batch_tensor(goal), collect=collect)

    def encode_indexed(self, obs, goals, goal_idx, zk=None):
        goals = np.asarray(goals)[np.asarray(goal_idx, dtype=np.int64)]
        return self.encode(obs, goals)


class MidFusionEncoder(Module):
    mechanism = MID
    needs_keypoints = False

    def __init__(self, cfg, spec, resolution, rng):
        self.depth = cfg.mid_depth
        self.obs_encoder = ImageEncoder(spec, 3, (resolution, resolution), rng,
                                        film_placement=cfg.film_placement)
        # conditioning branch only needs blocks up to the fusion depth
        self.goal_trunk = Trunk(spec, 3, rng, n_blocks=self.depth)
        self.mappers = [AffineMapper(spec.blocks[i][0], cfg.mid_mapping, rng)
                        for i in range(self.depth)]

    def goal_factors(self, goal_t):
        collect = {}
        self.goal_trunk(goal_t, collect=collect)
        return [self.mappers[i](collect[f"block{i}.out"]) for i in range(self.depth)]

    def _film_list(self, factors):
        return [factors[i] if i < self.depth else None for i in range(4)]

    def encode(self, obs, goal, zk=None, collect=None):
        factors = self.goal_factors(as_batch_tensor(goal))
        return self.obs_encoder(as_batch_tensor(obs), film=self._film_list(factors), collect=collect)

    def encode_indexed(self, obs, goals, goal_idx, zk=None):
        factors = self.goal_factors(as_batch_tensor(goals))
        expanded = [(ops.index_select0(g, goal_idx), ops.index_select0(b, goal_idx))
                    for g, b in factors]
        return self.obs_encoder(as_batch_tensor(obs), film=self._film_list(expanded))


class SkipFusionEncoder(_TwoEncoderBase):
    """Late fusion plus a constant keypoint-match branch mixed into the head."""

    mechanism = SKIP
    needs_keypoints = True

    def __init__(self, cfg, spec, resolution, rng):
        super().__init__(cfg, spec, resolution, rng)
        self.k = cfg.skip_k
        self.kp_fc = Linear(4 * cfg.skip_k, _SKIP_FC_DIM, rng=rng)
        self.fuse = Linear(2 * spec.embed_dim + _SKIP_FC_DIM, spec.embed_dim, rng=rng)

    def _check_zk(self, zk, batch, dtype=np.float32):
        if zk is None:
            raise ConfigurationError("skip fusion needs the flattened keypoint vector z_k")
        zk = np.asarray(zk, dtype=dtype)
        if zk.ndim == 1:
            zk = zk[None]
        if zk.shape != (batch, 4 * self.k):
            raise ConfigurationError(f"z_k must have shape ({batch}, {4 * self.k}), got {zk.shape}")
        return Tensor(zk)  # constant input: the keypoint branch is not differentiated

    def encode(self, obs, goal, zk=None, collect=None):
        obs_t, goal_t = as_batch_tensor(obs), as_batch_tensor(goal)
        eo, eg = self._halves(obs_t, goal_t, collect)
        kp = ops.relu(self.kp_fc(self._check_zk(zk, obs_t.shape[0], obs_t.dtype)))
        return ops.relu(self.fuse(ops.concat([eg, eo, kp], axis=1)))

    def encode_indexed(self, obs, goals, goal_idx, zk=None):
        obs_t = as_batch_tensor(obs)
        eo = self.obs_encoder(obs_t)
        eg = ops.index_select0(self.goal_encoder(as_batch_tensor(goals)), goal_idx)
        kp = ops.relu(self.kp_fc(self._check_zk(zk, obs_t.shape[0], obs_t.dtype)))
        return ops.relu(self.fuse(ops.concat([eg, eo, kp], axis=1)))


_BUILDERS = {LATE: LateFusionEncoder, EARLY: EarlyFusionEncoder,
             MID: MidFusionEncoder, SKIP: SkipFusionEncoder}


def build_encoder(cfg, spec=None, resolution=64, rng=None):
    spec = spec or BackboneSpec(embed_dim=cfg.embed_dim)
    if spec.embed_dim != cfg.embed_dim:
        raise ConfigurationError(f"backbone embed_dim {spec.embed_dim} != fusion embed_dim {cfg.embed_dim}")
    rng = rng if rng is not None else np.random.default_rng(0)
    return _BUILDERS[cfg.mechanism](cfg, spec, resolution, rng)
