"""Pure-numpy kernel fallback: im2col convolutions and a scalar DDA raycaster.

Mirrors the Cython extension's interface exactly. The raycaster keeps the
same floating-point operation order as the compiled version so both backends
produce bit-identical images.
"""

import math

import numpy as np

BACKEND = "python"


def _out_size(size, k, stride, pad):
    return (size + 2 * pad - k) // stride + 1


def _im2col(xp, kh, kw, stride, ho, wo):
    n, c, _, _ = xp.shape
    s0, s1, s2, s3 = xp.strides
    shape = (n, c, kh, kw, ho, wo)
    strides = (s0, s1, s2, s3, s2 * stride, s3 * stride)
    return np.lib.stride_tricks.as_strided(xp, shape=shape, strides=strides)


def _pad(x, pad):
    if pad == 0:
        return x
    return np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))


def conv2d_forward(x, w, b, stride, pad):
    n, cin, h, wd = x.shape
    cout, _, kh, kw = w.shape
    ho, wo = _out_size(h, kh, stride, pad), _out_size(wd, kw, stride, pad)
    cols = _im2col(_pad(x, pad), kh, kw, stride, ho, wo)
    mat = cols.transpose(0, 4, 5, 1, 2, 3).reshape(n * ho * wo, cin * kh * kw)
    out = mat @ w.reshape(cout, -1).T
    out += b
    return np.ascontiguousarray(out.reshape(n, ho, wo, cout).transpose(0, 3, 1, 2))


def conv2d_backward_input(dout, w, stride, pad, h, wd):
    n, cout, ho, wo = dout.shape
    _, cin, kh, kw = w.shape
    dmat = dout.transpose(0, 2, 3, 1).reshape(n * ho * wo, cout)
    dcols = (dmat @ w.reshape(cout, -1)).reshape(n, ho, wo, cin, kh, kw)
    dcols = dcols.transpose(0, 3, 4, 5, 1, 2)  # (n, cin, kh, kw, ho, wo)
    dxp = np.zeros((n, cin, h + 2 * pad, wd + 2 * pad), dtype=dout.dtype)
    for i in range(kh):
        for j in range(kw):
            dxp[:, :, i:i + stride * ho:stride, j:j + stride * wo:stride] += dcols[:, :, i, j]
    if pad:
        return np.ascontiguousarray(dxp[:, :, pad:pad + h, pad:pad + wd])
    return dxp


def conv2d_backward_params(dout, x, kh, kw, stride, pad):
    n, cout, ho, wo = dout.shape
    cin = x.shape[1]
    cols = _im2col(_pad(x, pad), kh, kw, stride, ho, wo)
    mat = cols.transpose(0, 4, 5, 1, 2, 3).reshape(n * ho * wo, cin * kh * kw)
    dmat = dout.transpose(0, 2, 3, 1).reshape(n * ho * wo, cout)
    dw = (dmat.T @ mat).reshape(cout, cin, kh, kw)
    db = dout.sum(axis=(0, 2, 3))
    return dw, db


_FAR = 1e30


def raycast(occ, px, py, theta, hfov, ncols):
    """Cast one ray per image column through a boolean occupancy grid.

    Pose is in cell units. Returns perpendicular hit distances (cell units),
    the fractional position along the hit wall face, hit cell coordinates and
    the wall side (0 = x-facing, 1 = y-facing).
    """
    perp = np.empty(ncols, dtype=np.float64)
    wall_u = np.empty(ncols, dtype=np.float64)
    hit_x = np.empty(ncols, dtype=np.int64)
    hit_y = np.empty(ncols, dtype=np.int64)
    side_out = np.empty(ncols, dtype=np.uint8)

    dir_x, dir_y = math.cos(theta), math.sin(theta)
    half = math.tan(0.5 * hfov)
    # plane points to the agent's right, so column 0 is the left view edge
    plane_x, plane_y = dir_y * half, -dir_x * half
    max_iter = occ.shape[0] * occ.shape[1]

    for col in range(ncols):
        cam = 2.0 * (col + 0.5) / ncols - 1.0
        rdx = dir_x + plane_x * cam
        rdy = dir_y + plane_y * cam
        map_x, map_y = int(px), int(py)
        delta_x = abs(1.0 / rdx) if rdx != 0.0 else _FAR
        delta_y = abs(1.0 / rdy) if rdy != 0.0 else _FAR
        if rdx < 0.0:
            step_x, side_x = -1, (px - map_x) * delta_x
        else:
            step_x, side_x = 1, (map_x + 1.0 - px) * delta_x
        if rdy < 0.0:
            step_y, side_y = -1, (py - map_y) * delta_y
        else:
            step_y, side_y = 1, (map_y + 1.0 - py) * delta_y
        side = 0
        for _ in range(max_iter):
            if side_x < side_y:
                side_x += delta_x
                map_x += step_x
                side = 0
            else:
                side_y += delta_y
                map_y += step_y
                side = 1
            if occ[map_y, map_x]:
                break
        if side == 0:
            d = side_x - delta_x
            u = py + d * rdy
        else:
            d = side_y - delta_y
            u = px + d * rdx
        perp[col] = d
        wall_u[col] = u - math.floor(u)
        hit_x[col] = map_x
        hit_y[col] = map_y
        side_out[col] = side
    return perp, wall_u, hit_x, hit_y, side_out
