"""Minimal tensor library: reverse-mode autodiff plus the layer set used here."""

from . import init, ops
from .checkpoint import load_checkpoint, save_checkpoint
from .layers import Conv2d, Embedding, GroupNorm, GRUCell, Linear, Module, Parameter
from .optim import Adam, clip_grad_norm
from .tensor import Tensor, grad_enabled, no_grad

conv2d = ops.conv2d
film_affine = ops.film_affine
group_norm = ops.group_norm

__all__ = [
    "Adam", "Conv2d", "Embedding", "GroupNorm", "GRUCell", "Linear", "Module",
    "Parameter", "Tensor", "clip_grad_norm", "conv2d", "film_affine",
    "grad_enabled", "group_norm", "init", "load_checkpoint", "no_grad", "ops",
    "save_checkpoint",
]
