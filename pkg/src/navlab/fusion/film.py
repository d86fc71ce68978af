"""Mapping goal activation maps into feature-wise affine factors.

Two mappings: fine-grained/high-resolution (1x1 convolutions, factors keep
the full C,H,W of the conditioning map) and semantic (global average pool
then fully-connected, per-channel factors only). Both start as the identity
transform: zero mapping weights with the scale bias at one.
"""

from ..errors import ConfigurationError
from ..nd import Conv2d, Linear, Module, ops

FG_HR = "fg_hr"
SEMANTIC = "semantic"
MAPPINGS = (FG_HR, SEMANTIC)


class AffineMapper(Module):
    """Produces (gamma, beta) for one block from that block's goal activation."""

    def __init__(self, channels, mode, rng):
        if mode not in MAPPINGS:
            raise ConfigurationError(f"unknown affine mapping {mode!r}; expected one of {MAPPINGS}")
        self.mode = mode
        if mode == FG_HR:
            self.scale = Conv2d(channels, channels, 1, rng=rng, zero_init=True)
            self.shift = Conv2d(channels, channels, 1, rng=rng, zero_init=True)
        else:
            self.scale = Linear(channels, channels, rng=rng, scheme="zeros")
            self.shift = Linear(channels, channels, rng=rng, scheme="zeros")
        self.scale.b.data[:] = 1.0  # identity transform at initialization

    def __call__(self, z_goal):
        """z_goal: (N, C, H, W). Returns factors shaped (N, C, H, W) for the
        fine-grained mapping or (N, C) for the semantic one."""
        if self.mode == FG_HR:
            return self.scale(z_goal), self.shift(z_goal)
        pooled = ops.mean(z_goal, axis=(2, 3))
        return self.scale(pooled), self.shift(pooled)


def map_affine(mapper, z_goal):
    """Functional alias used by tests mirroring the operation contract."""
    return mapper(z_goal)
