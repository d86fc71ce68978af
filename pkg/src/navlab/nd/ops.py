"""Primitive differentiable operations.

Each op computes its result eagerly with numpy (or a kernel backend) and, when
gradients are live, attaches a closure that routes the output gradient to its
parents. Binary ops broadcast like numpy; gradients are summed back over the
broadcast axes.
"""

import numpy as np

from .. import _kernels
from ..errors import ConfigurationError
from .tensor import as_tensor, check_same_dtype, make_node


def _unbroadcast(g, shape):
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


# -- arithmetic ---------------------------------------------------------------

def add(a, b):
    if isinstance(b, (int, float)):
        a = as_tensor(a)
        return make_node(a.data + b, (a,), lambda g: a.accumulate_grad(g))
    if isinstance(a, (int, float)):
        return add(b, a)
    a, b = as_tensor(a), as_tensor(b)
    check_same_dtype(a, b)

    def backward(g):
        a.accumulate_grad(_unbroadcast(g, a.shape))
        b.accumulate_grad(_unbroadcast(g, b.shape))

    return make_node(a.data + b.data, (a, b), backward)


def mul(a, b):
    if isinstance(b, (int, float)):
        a = as_tensor(a)
        return make_node(a.data * b, (a,), lambda g: a.accumulate_grad(g * b))
    if isinstance(a, (int, float)):
        return mul(b, a)
    a, b = as_tensor(a), as_tensor(b)
    check_same_dtype(a, b)

    def backward(g):
        a.accumulate_grad(_unbroadcast(g * b.data, a.shape))
        b.accumulate_grad(_unbroadcast(g * a.data, b.shape))

    return make_node(a.data * b.data, (a, b), backward)


def sub(a, b):
    if isinstance(b, (int, float)):
        return add(a, -b)
    if isinstance(a, (int, float)):
        return add(neg(b), a)
    a, b = as_tensor(a), as_tensor(b)
    check_same_dtype(a, b)

    def backward(g):
        a.accumulate_grad(_unbroadcast(g, a.shape))
        b.accumulate_grad(_unbroadcast(-g, b.shape))

    return make_node(a.data - b.data, (a, b), backward)


def neg(a):
    a = as_tensor(a)
    return make_node(-a.data, (a,), lambda g: a.accumulate_grad(-g))


def pow_scalar(a, p):
    a = as_tensor(a)
    p = float(p)

    def backward(g):
        a.accumulate_grad(g * p * a.data ** (p - 1.0))

    return make_node(a.data ** p, (a,), backward)


def matmul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    check_same_dtype(a, b)
    if a.ndim != 2 or b.ndim != 2:
        raise ConfigurationError(f"matmul expects 2-D operands, got {a.shape} @ {b.shape}")

    def backward(g):
        a.accumulate_grad(g @ b.data.T)
        b.accumulate_grad(a.data.T @ g)

    return make_node(a.data @ b.data, (a, b), backward)


# -- nonlinearities -----------------------------------------------------------

def relu(a):
    a = as_tensor(a)
    out_data = np.maximum(a.data, 0)
    return make_node(out_data, (a,), lambda g: a.accumulate_grad(g * (out_data > 0)))


def tanh(a):
    a = as_tensor(a)
    out_data = np.tanh(a.data)
    return make_node(out_data, (a,), lambda g: a.accumulate_grad(g * (1.0 - out_data * out_data)))


def sigmoid(a):
    a = as_tensor(a)
    out_data = 1.0 / (1.0 + np.exp(-a.data))
    return make_node(out_data, (a,), lambda g: a.accumulate_grad(g * out_data * (1.0 - out_data)))


def exp(a):
    a = as_tensor(a)
    out_data = np.exp(a.data)
    return make_node(out_data, (a,), lambda g: a.accumulate_grad(g * out_data))


def log(a):
    a = as_tensor(a)
    return make_node(np.log(a.data), (a,), lambda g: a.accumulate_grad(g / a.data))


# -- reductions ---------------------------------------------------------------

def _expand_reduced(g, in_shape, axis, keepdims):
    if axis is None:
        return np.broadcast_to(g.reshape((1,) * len(in_shape)), in_shape)
    axes = axis if isinstance(axis, tuple) else (axis,)
    axes = sorted(a % len(in_shape) for a in axes)
    if not keepdims:
        shape = list(g.shape)
        for a in axes:
            shape.insert(a, 1)
        g = g.reshape(shape)
    return np.broadcast_to(g, in_shape)


def sum_(a, axis=None, keepdims=False):
    a = as_tensor(a)
    in_shape = a.shape

    def backward(g):
        a.accumulate_grad(_expand_reduced(g, in_shape, axis, keepdims))

    return make_node(a.data.sum(axis=axis, keepdims=keepdims), (a,), backward)


def mean(a, axis=None, keepdims=False):
    a = as_tensor(a)
    in_shape = a.shape
    count = a.data.size if axis is None else np.prod(
        [a.shape[ax % a.ndim] for ax in (axis if isinstance(axis, tuple) else (axis,))])
    inv = 1.0 / float(count)

    def backward(g):
        a.accumulate_grad(_expand_reduced(g, in_shape, axis, keepdims) * inv)

    return make_node(a.data.mean(axis=axis, keepdims=keepdims), (a,), backward)


# -- shape manipulation -------------------------------------------------------

def reshape(a, shape):
    a = as_tensor(a)
    in_shape = a.shape
    return make_node(a.data.reshape(shape), (a,), lambda g: a.accumulate_grad(g.reshape(in_shape)))


def transpose(a, axes):
    a = as_tensor(a)
    inv = tuple(np.argsort(axes))
    return make_node(np.ascontiguousarray(a.data.transpose(axes)), (a,),
                     lambda g: a.accumulate_grad(g.transpose(inv)))


def concat(tensors, axis):
    tensors = [as_tensor(t) for t in tensors]
    sizes = [t.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def backward(g):
        for t, lo, hi in zip(tensors, offsets[:-1], offsets[1:]):
            index = [slice(None)] * g.ndim
            index[axis] = slice(lo, hi)
            t.accumulate_grad(g[tuple(index)])

    return make_node(np.concatenate([t.data for t in tensors], axis=axis), tensors, backward)


def index_select0(a, idx):
    """Select rows (axis 0) by an integer index array; duplicates allowed."""
    a = as_tensor(a)
    idx = np.asarray(idx, dtype=np.int64)

    def backward(g):
        if not a.requires_grad:
            return
        da = np.zeros_like(a.data)
        np.add.at(da, idx, g)
        a.accumulate_grad(da)

    return make_node(a.data[idx], (a,), backward)


def gather_rows(a, idx):
    """Pick one column per row: out[i] = a[i, idx[i]]."""
    a = as_tensor(a)
    idx = np.asarray(idx, dtype=np.int64)
    rows = np.arange(a.shape[0])

    def backward(g):
        if not a.requires_grad:
            return
        da = np.zeros_like(a.data)
        da[rows, idx] = g
        a.accumulate_grad(da)

    return make_node(a.data[rows, idx], (a,), backward)


def clip(a, lo, hi):
    a = as_tensor(a)
    mask = (a.data >= lo) & (a.data <= hi)
    return make_node(np.clip(a.data, lo, hi), (a,), lambda g: a.accumulate_grad(g * mask))


def minimum(a, b):
    a, b = as_tensor(a), as_tensor(b)
    check_same_dtype(a, b)
    take_a = a.data <= b.data

    def backward(g):
        a.accumulate_grad(_unbroadcast(g * take_a, a.shape))
        b.accumulate_grad(_unbroadcast(g * ~take_a, b.shape))

    return make_node(np.where(take_a, a.data, b.data), (a, b), backward)


def log_softmax(a, axis=-1):
    a = as_tensor(a)
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=axis, keepdims=True))
    out_data = shifted - lse
    probs = np.exp(out_data)

    def backward(g):
        a.accumulate_grad(g - probs * g.sum(axis=axis, keepdims=True))

    return make_node(out_data, (a,), backward)


# -- structured layers --------------------------------------------------------

def conv2d(x, w, b, stride=1, padding=0):
    """Batched 2-D convolution (cross-correlation); accepts CHW or NCHW input.

    Output spatial size is floor((H + 2*padding - k) / stride) + 1.
    """
    x, w, b = as_tensor(x), as_tensor(w), as_tensor(b)
    if x.ndim == 3:
        out = conv2d(reshape(x, (1,) + x.shape), w, b, stride, padding)
        return reshape(out, out.shape[1:])
    if x.ndim != 4 or w.ndim != 4:
        raise ConfigurationError(f"conv2d expects NCHW input and OIKK weights, got {x.shape}, {w.shape}")
    n, cin, h, wd = x.shape
    cout, win, kh, kw = w.shape
    if cin != win:
        raise ConfigurationError(f"conv2d channel mismatch: input has {cin}, weights expect {win}")
    if b.shape != (cout,):
        raise ConfigurationError(f"conv2d bias must have shape ({cout},), got {b.shape}")
    if kh > h + 2 * padding or kw > wd + 2 * padding:
        raise ConfigurationError(f"kernel {kh}x{kw} larger than padded input {h + 2 * padding}x{wd + 2 * padding}")
    check_same_dtype(x, w)
    check_same_dtype(x, b)
    stride, padding = int(stride), int(padding)
    out_data = _kernels.conv2d_forward(x.data, w.data, b.data, stride, padding)

    def backward(g):
        g = np.ascontiguousarray(g)
        if x.requires_grad:
            x.accumulate_grad(_kernels.conv2d_backward_input(g, w.data, stride, padding, h, wd))
        if w.requires_grad or b.requires_grad:
            dw, db = _kernels.conv2d_backward_params(g, x.data, kh, kw, stride, padding)
            w.accumulate_grad(dw)
            b.accumulate_grad(db)

    return make_node(out_data, (x, w, b), backward)


def _film_view(p, z):
    """Broadcast view of a FiLM factor against the activation it modulates."""
    if p.shape == z.shape:
        return p.data
    if z.ndim == 4 and p.shape == (z.shape[1],):
        return p.data.reshape(1, -1, 1, 1)
    if z.ndim == 4 and p.shape == z.shape[:2]:
        return p.data.reshape(p.shape + (1, 1))
    if z.ndim == 3 and p.shape == (z.shape[0],):
        return p.data.reshape(-1, 1, 1)
    raise ConfigurationError(f"FiLM factor shape {p.shape} incompatible with activation {z.shape}")


def film_affine(z, gamma, beta):
    """Feature-wise affine modulation: gamma * z + beta.

    Factors either match z elementwise (fine-grained, full-resolution mode) or
    are per-channel vectors broadcast over the spatial axes (semantic mode).
    """
    z, gamma, beta = as_tensor(z), as_tensor(gamma), as_tensor(beta)
    if gamma.shape != beta.shape:
        raise ConfigurationError(f"gamma {gamma.shape} and beta {beta.shape} must match")
    gv = _film_view(gamma, z)
    bv = _film_view(beta, z)

    def backward(g):
        z.accumulate_grad(g * gv)
        if gamma.requires_grad:
            gamma.accumulate_grad(_unbroadcast(g * z.data, gv.shape).reshape(gamma.shape))
        if beta.requires_grad:
            beta.accumulate_grad(_unbroadcast(g, bv.shape).reshape(beta.shape))

    return make_node(gv * z.data + bv, (z, gamma, beta), backward)


def group_norm(x, gamma, beta, groups, eps=1e-5):
    """Group normalization over (C/G, H, W) slices followed by a channel affine."""
    x, gamma, beta = as_tensor(x), as_tensor(gamma), as_tensor(beta)
    if x.ndim != 4:
        raise ConfigurationError(f"group_norm expects NCHW input, got {x.shape}")
    n, c, h, w = x.shape
    if c % groups != 0:
        raise ConfigurationError(f"channels {c} not divisible by {groups} groups")
    m = (c // groups) * h * w
    xg = x.data.reshape(n, groups, m)
    mu = xg.mean(axis=-1, keepdims=True)
    var = xg.var(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat_g = (xg - mu) * inv
    xhat = xhat_g.reshape(n, c, h, w)
    gview = gamma.data.reshape(1, c, 1, 1)
    out_data = xhat * gview + beta.data.reshape(1, c, 1, 1)

    def backward(g):
        if gamma.requires_grad:
            gamma.accumulate_grad((g * xhat).sum(axis=(0, 2, 3)))
        if beta.requires_grad:
            beta.accumulate_grad(g.sum(axis=(0, 2, 3)))
        if x.requires_grad:
            gh = (g * gview).reshape(n, groups, m)
            mean1 = gh.mean(axis=-1, keepdims=True)
            mean2 = (gh * xhat_g).mean(axis=-1, keepdims=True)
            x.accumulate_grad(((gh - mean1 - xhat_g * mean2) * inv).reshape(n, c, h, w))

    return make_node(out_data, (x, gamma, beta), backward)
