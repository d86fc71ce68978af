"""Kernel backend selection.

Two interchangeable implementations exist for the hot kernels: a compiled
Cython extension and a pure-numpy fallback. In the default ``auto`` mode each
kernel family uses the implementation that benchmarks faster (see
benchmarks/bench_kernels.py): convolutions run on the numpy im2col + BLAS
path, raycasting on the compiled DDA loop when the extension is importable.
Set NAVLAB_KERNELS=cython or =python to force one implementation everywhere;
forcing cython without the built extension is an error.
"""

import os

from . import _numpy_impl

_forced = os.environ.get("NAVLAB_KERNELS", "").strip().lower()

try:
    from . import _core
except ImportError:
    _core = None

if _forced == "python":
    _conv_impl = _ray_impl = _numpy_impl
elif _forced == "cython":
    if _core is None:
        raise RuntimeError("NAVLAB_KERNELS=cython but the compiled extension is not built")
    _conv_impl = _ray_impl = _core
elif _forced in ("", "auto"):
    _conv_impl = _numpy_impl
    _ray_impl = _core if _core is not None else _numpy_impl
else:
    raise RuntimeError(f"NAVLAB_KERNELS must be 'cython', 'python' or 'auto', got {_forced!r}")

CONV_BACKEND = _conv_impl.BACKEND
RAYCAST_BACKEND = _ray_impl.BACKEND
BACKEND = f"conv={CONV_BACKEND},raycast={RAYCAST_BACKEND}"

conv2d_forward = _conv_impl.conv2d_forward
conv2d_backward_input = _conv_impl.conv2d_backward_input
conv2d_backward_params = _conv_impl.conv2d_backward_params
raycast = _ray_impl.raycast


def available_backends():
    names = ["python"]
    if _core is not None:
        names.insert(0, "cython")
    return names


def get_impl(name):
    """Fetch a specific backend module (kernel benchmark and parity tests)."""
    if name == "python":
        return _numpy_impl
    if name == "cython":
        if _core is None:
            raise ValueError("compiled kernel extension is not built")
        return _core
    raise ValueError(f"unknown kernel backend {name!r}")
