"""Trainable layer modules with a dotted-path parameter registry.

Parameters are discovered by walking module attributes in assignment order,
so registry order (and therefore checkpoint buffer order) is deterministic.
Modules shared between attributes register their parameters once, under the
first path encountered (this is how weight tying is expressed).
"""

import numpy as np

from ..errors import ConfigurationError, NumericalError
from . import init, ops
from .tensor import Tensor


class Parameter(Tensor):
    def __init__(self, data, dtype=None):
        super().__init__(data, requires_grad=True, dtype=dtype)


class Module:
    def named_parameters(self, prefix=""):
        seen = set()
        yield from self._walk(prefix, seen)

    def _walk(self, prefix, seen):
        if id(self) in seen:
            return
        seen.add(id(self))
        for attr, value in vars(self).items():
            path = f"{prefix}.{attr}" if prefix else attr
            yield from _walk_value(path, value, seen)

    def parameters(self):
        """Registry of every reachable parameter, keyed by unique dotted path."""
        out = {}
        for name, p in self.named_parameters():
            if name in out and out[name] is not p:
                raise ConfigurationError(f"duplicate parameter name {name!r}")
            out[name] = p
        return out

    def num_parameters(self):
        return sum(p.size for p in self.parameters().values())

    def zero_grad(self):
        for p in self.parameters().values():
            p.grad = None

    def state_arrays(self):
        return {name: p.data for name, p in self.parameters().items()}

    def load_state_arrays(self, arrays):
        params = self.parameters()
        missing = set(params) - set(arrays)
        if missing:
            raise ConfigurationError(f"checkpoint missing parameters: {sorted(missing)[:5]}...")
        for name, p in params.items():
            arr = np.asarray(arrays[name], dtype=p.dtype)
            if arr.shape != p.shape:
                raise ConfigurationError(f"shape mismatch for {name}: {arr.shape} vs {p.shape}")
            p.data = np.ascontiguousarray(arr)


def _walk_value(path, value, seen):
    if isinstance(value, Parameter):
        if id(value) in seen:
            return
        seen.add(id(value))
        yield path, value
    elif isinstance(value, Module):
        yield from value._walk(path, seen)
    elif isinstance(value, (list, tuple)):
        for i, item in enumerate(value):
            yield from _walk_value(f"{path}.{i}", item, seen)


class Conv2d(Module):
    def __init__(self, cin, cout, k, stride=1, padding=0, rng=None, dtype=np.float32, zero_init=False):
        self.stride = stride
        self.padding = padding
        if zero_init:
            w = np.zeros((cout, cin, k, k), dtype=np.float32)
        else:
            w = init.kaiming_uniform(rng, (cout, cin, k, k), fan_in=cin * k * k)
        self.w = Parameter(w, dtype=dtype)
        self.b = Parameter(np.zeros(cout, dtype=np.float32), dtype=dtype)

    def __call__(self, x):
        return ops.conv2d(x, self.w, self.b, self.stride, self.padding)


class Linear(Module):
    def __init__(self, nin, nout, rng=None, dtype=np.float32, scheme="kaiming", gain=1.0):
        if scheme == "orthogonal":
            w = init.orthogonal(rng, (nin, nout), gain=gain)
        elif scheme == "kaiming":
            w = init.kaiming_uniform(rng, (nin, nout), fan_in=nin)
        elif scheme == "zeros":
            w = np.zeros((nin, nout), dtype=np.float32)
        else:
            raise ConfigurationError(f"unknown init scheme {scheme!r}")
        self.w = Parameter(w, dtype=dtype)
        self.b = Parameter(np.zeros(nout, dtype=np.float32), dtype=dtype)

    def __call__(self, x):
        return ops.add(ops.matmul(x, self.w), self.b)


class GroupNorm(Module):
    def __init__(self, channels, groups=8, dtype=np.float32):
        self.groups = groups
        self.gamma = Parameter(np.ones(channels, dtype=np.float32), dtype=dtype)
        self.beta = Parameter(np.zeros(channels, dtype=np.float32), dtype=dtype)

    def __call__(self, x):
        return ops.group_norm(x, self.gamma, self.beta, self.groups)


class GRUCell(Module):
    """Two-gate recurrent cell: update and reset gates with a tanh candidate."""

    def __init__(self, din, dh, rng=None, dtype=np.float32):
        self.wz = Parameter(init.orthogonal(rng, (din, dh)), dtype=dtype)
        self.uz = Parameter(init.orthogonal(rng, (dh, dh)), dtype=dtype)
        self.bz = Parameter(np.zeros(dh, dtype=np.float32), dtype=dtype)
        self.wr = Parameter(init.orthogonal(rng, (din, dh)), dtype=dtype)
        self.ur = Parameter(init.orthogonal(rng, (dh, dh)), dtype=dtype)
        self.br = Parameter(np.zeros(dh, dtype=np.float32), dtype=dtype)
        self.wh = Parameter(init.orthogonal(rng, (din, dh)), dtype=dtype)
        self.uh = Parameter(init.orthogonal(rng, (dh, dh)), dtype=dtype)
        self.bh = Parameter(np.zeros(dh, dtype=np.float32), dtype=dtype)

    def step(self, h_prev, x):
        """One recurrent transition; accepts (D,) or (N, D) operands."""
        if not (np.isfinite(x.data).all() and np.isfinite(h_prev.data).all()):
            raise NumericalError("non-finite input to the recurrent cell")
        squeeze = x.ndim == 1
        if squeeze:
            x = ops.reshape(x, (1, -1))
            h_prev = ops.reshape(h_prev, (1, -1))
        z = ops.sigmoid(ops.add(ops.add(ops.matmul(x, self.wz), ops.matmul(h_prev, self.uz)), self.bz))
        r = ops.sigmoid(ops.add(ops.add(ops.matmul(x, self.wr), ops.matmul(h_prev, self.ur)), self.br))
        cand = ops.tanh(ops.add(ops.add(ops.matmul(x, self.wh),
                                        ops.matmul(ops.mul(r, h_prev), self.uh)), self.bh))
        h_new = ops.add(ops.mul(ops.sub(1.0, z), h_prev), ops.mul(z, cand))
        if squeeze:
            h_new = ops.reshape(h_new, (-1,))
        return h_new


class Embedding(Module):
    def __init__(self, rows, dim, rng=None, dtype=np.float32):
        self.table = Parameter(init.normal(rng, (rows, dim), std=1.0 / np.sqrt(dim)), dtype=dtype)

    def __call__(self, idx):
        return ops.index_select0(self.table, idx)
