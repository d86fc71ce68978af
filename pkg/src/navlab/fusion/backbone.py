"""Shared residual-CNN backbone: a 9-conv stack (stem + 4 two-conv blocks).

Blocks optionally apply a feature-wise affine (FiLM) transform to their
second convolution's output, either after that conv's normalization
(default) or before it; this is where mid fusion hooks in.
"""

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigurationError
from ..nd import Conv2d, GroupNorm, Linear, Module, Tensor, ops


@dataclass(frozen=True)
class BackboneSpec:
    stem_channels: int = 32
    stem_kernel: int = 5
    stem_stride: int = 2
    blocks: tuple = ((64, 2), (128, 2), (256, 2), (256, 1))
    embed_dim: int = 512
    groups: int = 8

    def __post_init__(self):
        if len(self.blocks) != 4:
            raise ConfigurationError(f"backbone needs exactly 4 residual blocks, got {len(self.blocks)}")
        for ch, stride in self.blocks:
            if stride not in (1, 2):
                raise ConfigurationError(f"block stride must be 1 or 2, got {stride}")
            if ch % self.groups:
                raise ConfigurationError(f"block channels {ch} not divisible by {self.groups} groups")

    @staticmethod
    def tiny(embed_dim=32, groups=2):
        """Small spec for fast tests; same topology, narrow channels."""
        return BackboneSpec(stem_channels=8, stem_kernel=5, stem_stride=2,
                            blocks=((8, 2), (8, 2), (16, 2), (16, 1)),
                            embed_dim=embed_dim, groups=groups)

    def spatial_after_stem(self, size):
        return (size + 2 * (self.stem_kernel // 2) - self.stem_kernel) // self.stem_stride + 1

    def spatial_sizes(self, h, w):
        """(H, W) after the stem and after each block, in forward order."""
        sizes = [(self.spatial_after_stem(h), self.spatial_after_stem(w))]
        for _, stride in self.blocks:
            ph, pw = sizes[-1]
            sizes.append(((ph - 1) // stride + 1, (pw - 1) // stride + 1))
        return sizes


class ResidualBlock(Module):
    def __init__(self, cin, cout, stride, groups, rng, film_placement="post_norm"):
        if film_placement not in ("post_norm", "pre_norm"):
            raise ConfigurationError(f"unknown film placement {film_placement!r}")
        self.film_placement = film_placement
        self.conv1 = Conv2d(cin, cout, 3, stride=stride, padding=1, rng=rng)
        self.gn1 = GroupNorm(cout, groups)
        self.conv2 = Conv2d(cout, cout, 3, stride=1, padding=1, rng=rng)
        self.gn2 = GroupNorm(cout, groups)
        if stride != 1 or cin != cout:
            self.shortcut_conv = Conv2d(cin, cout, 1, stride=stride, rng=rng)
            self.shortcut_gn = GroupNorm(cout, groups)
        else:
            self.shortcut_conv = None
            self.shortcut_gn = None

    def __call__(self, x, film=None, collect=None, tag=""):
        h = ops.relu(self.gn1(self.conv1(x)))
        h = self.conv2(h)
        if film is not None and self.film_placement == "pre_norm":
            h = ops.film_affine(h, film[0], film[1])
        h = self.gn2(h)
        if film is not None and self.film_placement == "post_norm":
            if collect is not None:
                collect[f"{tag}pre_film"] = h
            h = ops.film_affine(h, film[0], film[1])
            if collect is not None:
                collect[f"{tag}post_film"] = h
        shortcut = x if self.shortcut_conv is None else self.shortcut_gn(self.shortcut_conv(x))
        return ops.relu(ops.add(h, shortcut))


class TrunkBody(Module):
    """Post-stem normalization and the residual blocks (optionally truncated)."""

    def __init__(self, spec, rng, film_placement="post_norm", n_blocks=None):
        self.spec = spec
        self.stem_gn = GroupNorm(spec.stem_channels, spec.groups)
        blocks = []
        cin = spec.stem_channels
        for cout, stride in spec.blocks[:n_blocks]:
            blocks.append(ResidualBlock(cin, cout, stride, spec.groups, rng, film_placement))
            cin = cout
        self.blocks = blocks

    def __call__(self, h, film=None, collect=None):
        """h: raw stem output. film: optional per-block (gamma, beta) or None entries."""
        h = ops.relu(self.stem_gn(h))
        for i, block in enumerate(self.blocks):
            pair = film[i] if film is not None else None
            h = block(h, film=pair, collect=collect, tag=f"block{i}.")
            if collect is not None:
                collect[f"block{i}.out"] = h
        return h


class Trunk(Module):
    """Stem convolution plus the block body; returns the final activation map."""

    def __init__(self, spec, in_channels, rng, film_placement="post_norm", n_blocks=None):
        self.spec = spec
        self.stem = Conv2d(in_channels, spec.stem_channels, spec.stem_kernel,
                           stride=spec.stem_stride, padding=spec.stem_kernel // 2, rng=rng)
        self.body = TrunkBody(spec, rng, film_placement, n_blocks=n_blocks)

    def __call__(self, x, film=None, collect=None):
        return self.body(self.stem(x), film=film, collect=collect)


class ImageEncoder(Module):
    """Trunk plus a flatten + fully-connected head producing the embedding."""

    def __init__(self, spec, in_channels, in_hw, rng, film_placement="post_norm"):
        self.spec = spec
        self.trunk = Trunk(spec, in_channels, rng, film_placement)
        fh, fw = spec.spatial_sizes(*in_hw)[-1]
        self.flat_dim = spec.blocks[-1][0] * fh * fw
        self.head = Linear(self.flat_dim, spec.embed_dim, rng=rng)

    def __call__(self, x, film=None, collect=None):
        h = self.trunk(x, film=film, collect=collect)
        flat = ops.reshape(h, (h.shape[0], self.flat_dim))
        return ops.relu(self.head(flat))


def as_batch_tensor(images):
    """Stack (B, 3, H, W) image arrays into a constant leaf tensor.

    float64 inputs stay float64 (high-precision gradient checks); everything
    else becomes float32.
    """
    arr = np.asarray(images)
    dtype = np.float64 if arr.dtype == np.float64 else np.float32
    arr = np.ascontiguousarray(arr, dtype=dtype)
    if arr.ndim == 3:
        arr = arr[None]
    return Tensor(arr)
