"""Goal/observation fusion encoders, FiLM mapping, and activation saliency."""

from dataclasses import dataclass

import numpy as np

from .backbone import BackboneSpec, ImageEncoder, Trunk, as_batch_tensor
from .eigencam import eigencam
from .encoders import (CHANNEL, CONCAT_MODES, EARLY, EDGE, JOINT, LATE,
                       MECHANISMS, MID, MODELINGS, SEPARATE, SKIP, STACK3D,
                       TIED, EarlyFusionEncoder, FusionConfig, LateFusionEncoder,
                       MidFusionEncoder, SkipFusionEncoder, build_encoder)
from .film import FG_HR, MAPPINGS, SEMANTIC, AffineMapper, map_affine


@dataclass(frozen=True)
class ActivationMap:
    """A C,H,W feature map captured at one backbone block."""

    block_index: int
    values: np.ndarray

    def heatmap(self):
        return eigencam(self.values)


__all__ = [
    "ActivationMap", "AffineMapper", "BackboneSpec", "CHANNEL", "CONCAT_MODES",
    "EARLY", "EDGE", "EarlyFusionEncoder", "FG_HR", "FusionConfig",
    "ImageEncoder", "JOINT", "LATE", "LateFusionEncoder", "MAPPINGS",
    "MECHANISMS", "MID", "MODELINGS", "MidFusionEncoder", "SEMANTIC",
    "SEPARATE", "SKIP", "STACK3D", "SkipFusionEncoder", "TIED", "Trunk",
    "as_batch_tensor", "build_encoder", "eigencam", "map_affine",
]
