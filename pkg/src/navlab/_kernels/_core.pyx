# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels: direct-loop convolution passes and the DDA raycaster.

Interface mirrors navlab._kernels._numpy_impl. The raycaster keeps the same
floating-point operation order as the fallback so images are bit-identical.
"""

import numpy as np

cimport numpy as cnp
from cython.parallel cimport prange
from libc.math cimport cos, sin, tan, fabs, floor

BACKEND = "cython"

ctypedef fused real:
    float
    double


cdef inline void _fwd_one(const real[:, :, :, ::1] x, const real[:, :, :, ::1] w,
                          const real[::1] b, real[:, :, :, ::1] out,
                          Py_ssize_t i, Py_ssize_t co,
                          Py_ssize_t stride, Py_ssize_t pad) noexcept nogil:
    cdef Py_ssize_t cin = x.shape[1], h = x.shape[2], wd = x.shape[3]
    cdef Py_ssize_t kh = w.shape[2], kw = w.shape[3]
    cdef Py_ssize_t ho = out.shape[2], wo = out.shape[3]
    cdef Py_ssize_t oy, ox, ci, ky, kx, iy, ix
    cdef real acc
    for oy in range(ho):
        for ox in range(wo):
            acc = b[co]
            for ci in range(cin):
                for ky in range(kh):
                    iy = oy * stride + ky - pad
                    if iy < 0 or iy >= h:
                        continue
                    for kx in range(kw):
                        ix = ox * stride + kx - pad
                        if ix < 0 or ix >= wd:
                            continue
                        acc = acc + x[i, ci, iy, ix] * w[co, ci, ky, kx]
            out[i, co, oy, ox] = acc


def conv2d_forward(const real[:, :, :, ::1] x, const real[:, :, :, ::1] w,
                   const real[::1] b, int stride, int pad):
    cdef Py_ssize_t n = x.shape[0], h = x.shape[2], wd = x.shape[3]
    cdef Py_ssize_t cout = w.shape[0], kh = w.shape[2], kw = w.shape[3]
    cdef Py_ssize_t ho = (h + 2 * pad - kh) // stride + 1
    cdef Py_ssize_t wo = (wd + 2 * pad - kw) // stride + 1
    if real is float:
        out_arr = np.empty((n, cout, ho, wo), dtype=np.float32)
    else:
        out_arr = np.empty((n, cout, ho, wo), dtype=np.float64)
    cdef real[:, :, :, ::1] out = out_arr
    cdef Py_ssize_t idx
    for idx in prange(n * cout, nogil=True, schedule="static"):
        _fwd_one(x, w, b, out, idx // cout, idx % cout, stride, pad)
    return out_arr


cdef inline void _bwd_input_one(const real[:, :, :, ::1] dout, const real[:, :, :, ::1] w,
                                real[:, :, :, ::1] dx, Py_ssize_t i, Py_ssize_t ci,
                                Py_ssize_t stride, Py_ssize_t pad) noexcept nogil:
    cdef Py_ssize_t cout = dout.shape[1], ho = dout.shape[2], wo = dout.shape[3]
    cdef Py_ssize_t kh = w.shape[2], kw = w.shape[3]
    cdef Py_ssize_t h = dx.shape[2], wd = dx.shape[3]
    cdef Py_ssize_t iy, ix, co, ky, kx, ty, tx, oy, ox
    cdef real acc
    for iy in range(h):
        for ix in range(wd):
            acc = 0
            for ky in range(kh):
                ty = iy + pad - ky
                if ty < 0 or ty % stride != 0:
                    continue
                oy = ty // stride
                if oy >= ho:
                    continue
                for kx in range(kw):
                    tx = ix + pad - kx
                    if tx < 0 or tx % stride != 0:
                        continue
                    ox = tx // stride
                    if ox >= wo:
                        continue
                    for co in range(cout):
                        acc = acc + dout[i, co, oy, ox] * w[co, ci, ky, kx]
            dx[i, ci, iy, ix] = acc


def conv2d_backward_input(const real[:, :, :, ::1] dout, const real[:, :, :, ::1] w,
                          int stride, int pad, int h, int wd):
    cdef Py_ssize_t n = dout.shape[0], cin = w.shape[1]
    if real is float:
        dx_arr = np.empty((n, cin, h, wd), dtype=np.float32)
    else:
        dx_arr = np.empty((n, cin, h, wd), dtype=np.float64)
    cdef real[:, :, :, ::1] dx = dx_arr
    cdef Py_ssize_t idx
    for idx in prange(n * cin, nogil=True, schedule="static"):
        _bwd_input_one(dout, w, dx, idx // cin, idx % cin, stride, pad)
    return dx_arr


cdef inline void _bwd_params_one(const real[:, :, :, ::1] dout, const real[:, :, :, ::1] x,
                                 real[:, :, :, ::1] dw, real[::1] db, Py_ssize_t co,
                                 Py_ssize_t stride, Py_ssize_t pad) noexcept nogil:
    cdef Py_ssize_t n = dout.shape[0], ho = dout.shape[2], wo = dout.shape[3]
    cdef Py_ssize_t cin = x.shape[1], h = x.shape[2], wd = x.shape[3]
    cdef Py_ssize_t kh = dw.shape[2], kw = dw.shape[3]
    cdef Py_ssize_t i, oy, ox, ci, ky, kx, iy, ix
    cdef real d, bacc
    bacc = 0
    for i in range(n):
        for oy in range(ho):
            for ox in range(wo):
                d = dout[i, co, oy, ox]
                bacc = bacc + d
                for ci in range(cin):
                    for ky in range(kh):
                        iy = oy * stride + ky - pad
                        if iy < 0 or iy >= h:
                            continue
                        for kx in range(kw):
                            ix = ox * stride + kx - pad
                            if ix < 0 or ix >= wd:
                                continue
                            dw[co, ci, ky, kx] += d * x[i, ci, iy, ix]
    db[co] = bacc


def conv2d_backward_params(const real[:, :, :, ::1] dout, const real[:, :, :, ::1] x,
                           int kh, int kw, int stride, int pad):
    cdef Py_ssize_t cout = dout.shape[1], cin = x.shape[1]
    if real is float:
        dw_arr = np.zeros((cout, cin, kh, kw), dtype=np.float32)
        db_arr = np.zeros(cout, dtype=np.float32)
    else:
        dw_arr = np.zeros((cout, cin, kh, kw), dtype=np.float64)
        db_arr = np.zeros(cout, dtype=np.float64)
    cdef real[:, :, :, ::1] dw = dw_arr
    cdef real[::1] db = db_arr
    cdef Py_ssize_t co
    for co in prange(cout, nogil=True, schedule="static"):
        _bwd_params_one(dout, x, dw, db, co, stride, pad)
    return dw_arr, db_arr


def raycast(occ, double px, double py, double theta, double hfov, int ncols):
    """Cast one ray per image column; see the numpy fallback for semantics."""
    occ_u8 = np.ascontiguousarray(occ, dtype=np.uint8)
    cdef const unsigned char[:, ::1] grid = occ_u8
    perp_arr = np.empty(ncols, dtype=np.float64)
    u_arr = np.empty(ncols, dtype=np.float64)
    hx_arr = np.empty(ncols, dtype=np.int64)
    hy_arr = np.empty(ncols, dtype=np.int64)
    side_arr = np.empty(ncols, dtype=np.uint8)
    cdef double[::1] perp = perp_arr
    cdef double[::1] wall_u = u_arr
    cdef cnp.int64_t[::1] hit_x = hx_arr
    cdef cnp.int64_t[::1] hit_y = hy_arr
    cdef unsigned char[::1] side_out = side_arr

    cdef double dir_x = cos(theta), dir_y = sin(theta)
    cdef double half = tan(0.5 * hfov)
    # plane points to the agent's right, so column 0 is the left view edge
    cdef double plane_x = dir_y * half, plane_y = -dir_x * half
    cdef Py_ssize_t max_iter = grid.shape[0] * grid.shape[1]

    cdef Py_ssize_t col, it
    cdef double cam, rdx, rdy, delta_x, delta_y, side_x, side_y, d, u
    cdef Py_ssize_t map_x, map_y
    cdef int step_x, step_y, side
    with nogil:
        for col in range(ncols):
            cam = 2.0 * (col + 0.5) / ncols - 1.0
            rdx = dir_x + plane_x * cam
            rdy = dir_y + plane_y * cam
            map_x = <Py_ssize_t>px
            map_y = <Py_ssize_t>py
            delta_x = fabs(1.0 / rdx) if rdx != 0.0 else 1e30
            delta_y = fabs(1.0 / rdy) if rdy != 0.0 else 1e30
            if rdx < 0.0:
                step_x = -1
                side_x = (px - map_x) * delta_x
            else:
                step_x = 1
                side_x = (map_x + 1.0 - px) * delta_x
            if rdy < 0.0:
                step_y = -1
                side_y = (py - map_y) * delta_y
            else:
                step_y = 1
                side_y = (map_y + 1.0 - py) * delta_y
            side = 0
            for it in range(max_iter):
                if side_x < side_y:
                    side_x += delta_x
                    map_x += step_x
                    side = 0
                else:
                    side_y += delta_y
                    map_y += step_y
                    side = 1
                if grid[map_y, map_x]:
                    break
            if side == 0:
                d = side_x - delta_x
                u = py + d * rdy
            else:
                d = side_y - delta_y
                u = px + d * rdx
            perp[col] = d
            wall_u[col] = u - floor(u)
            hit_x[col] = map_x
            hit_y[col] = map_y
            side_out[col] = side
    return perp_arr, u_arr, hx_arr, hy_arr, side_arr
