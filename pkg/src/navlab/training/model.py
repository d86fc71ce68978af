"""Encoder + recurrent policy bundle trained and evaluated as one unit."""

import numpy as np

from ..fusion import BackboneSpec, build_encoder
from ..nd import Module, Tensor, no_grad
from ..policy import PolicyNetwork


class NavModel(Module):
    def __init__(self, fusion_cfg, backbone=None, resolution=64, hidden_dim=512, seed=0):
        ss = np.random.SeedSequence(seed)
        enc_rng, pol_rng = [np.random.default_rng(s) for s in ss.spawn(2)]
        backbone = backbone or BackboneSpec(embed_dim=fusion_cfg.embed_dim)
        self.fusion_cfg = fusion_cfg
        self.resolution = resolution
        self.encoder = build_encoder(fusion_cfg, backbone, resolution, enc_rng)
        self.policy = PolicyNetwork(embed_dim=backbone.embed_dim,
                                    hidden_dim=hidden_dim, rng=pol_rng)

    @property
    def needs_keypoints(self):
        return self.encoder.needs_keypoints

    def act_batch(self, obs, goals, prev_actions, hidden, zk=None, collect=None):
        """Graph-free batched policy step for rollouts and evaluation.

        Returns (logits, values, new_hidden) as numpy arrays.
        """
        with no_grad():
            z = self.encoder.encode(obs, goals, zk=zk, collect=collect)
            out = self.policy.act(z, prev_actions, Tensor(hidden))
        return out.logits.data, out.value.data, out.new_hidden.data
