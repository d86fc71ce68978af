"""Weight initializers. All take an explicit numpy Generator for determinism."""

import numpy as np


def orthogonal(rng, shape, gain=1.0):
    """(Semi-)orthogonal matrix via QR of a Gaussian, sign-fixed for uniqueness."""
    rows, cols = shape
    flat = rng.standard_normal((max(rows, cols), min(rows, cols)))
    q, r = np.linalg.qr(flat)
    q = q * np.sign(np.diag(r))
    if rows < cols:
        q = q.T
    return (gain * q[:rows, :cols]).astype(np.float32)


def kaiming_uniform(rng, shape, fan_in):
    """He-style uniform scaling for ReLU stacks: U(-sqrt(6/fan_in), +sqrt(6/fan_in))."""
    bound = np.sqrt(6.0 / fan_in)
    return rng.uniform(-bound, bound, size=shape).astype(np.float32)


def normal(rng, shape, std=1.0):
    return (std * rng.standard_normal(shape)).astype(np.float32)
