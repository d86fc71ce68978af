"""Benchmark the compiled kernel extension against the pure-numpy fallback.

Times the convolution passes (the encoder's hot loops, at the default
backbone's layer shapes) and the per-column raycaster. Run:

    python3 benchmarks/bench_kernels.py [--repeats 5] [--batch 8]
"""

import argparse
import time

import numpy as np

from navlab._kernels import available_backends, get_impl
from navlab.world import Pose, generate_world

# (cin, cout, k, stride, pad, h, w): the default backbone stack at 64x64 input
CONV_SHAPES = [
    ("stem 3->32 /2", 3, 32, 5, 2, 2, 64, 64),
    ("block1 32->64 /2", 32, 64, 3, 2, 1, 32, 32),
    ("block2 64->128 /2", 64, 128, 3, 2, 1, 16, 16),
    ("block3 128->256 /2", 128, 256, 3, 2, 1, 8, 8),
    ("block4 256->256", 256, 256, 3, 1, 1, 4, 4),
]


def time_call(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_conv(impl, batch, repeats):
    rng = np.random.default_rng(0)
    rows = []
    for name, cin, cout, k, stride, pad, h, w in CONV_SHAPES:
        x = rng.standard_normal((batch, cin, h, w)).astype(np.float32)
        wgt = rng.standard_normal((cout, cin, k, k)).astype(np.float32)
        b = np.zeros(cout, dtype=np.float32)
        out = impl.conv2d_forward(x, wgt, b, stride, pad)
        dout = rng.standard_normal(out.shape).astype(np.float32)
        fwd = time_call(lambda: impl.conv2d_forward(x, wgt, b, stride, pad), repeats)
        bwd_x = time_call(lambda: impl.conv2d_backward_input(dout, wgt, stride, pad, h, w), repeats)
        bwd_w = time_call(lambda: impl.conv2d_backward_params(dout, x, k, k, stride, pad), repeats)
        rows.append((name, fwd, bwd_x, bwd_w))
    return rows


def bench_raycast(impl, repeats):
    grid = generate_world(0, 10.0)
    free = np.argwhere(grid.free_mask)
    cy, cx = (int(v) for v in free[len(free) // 2])
    x, y = grid.center_of(cy, cx)
    pose = Pose(x, y, 0.7)
    rows = []
    for ncols in (64, 128):
        fn = lambda: impl.raycast(grid.cells, pose.x / grid.cell_size,
                                  pose.y / grid.cell_size, pose.theta,
                                  np.deg2rad(90.0), ncols)
        rows.append((f"raycast {ncols} cols", time_call(fn, repeats)))
    return rows


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=7)
    parser.add_argument("--batch", type=int, default=8)
    args = parser.parse_args()

    backends = available_backends()
    print(f"available backends: {', '.join(backends)}")
    conv = {b: bench_conv(get_impl(b), args.batch, args.repeats) for b in backends}
    rays = {b: bench_raycast(get_impl(b), args.repeats) for b in backends}

    def fmt(seconds):
        return f"{seconds * 1e3:9.3f} ms"

    header = f"{'kernel':<24}" + "".join(f"{b + ' fwd':>16}{b + ' bwd':>16}" for b in backends)
    print("\n" + header)
    for i, (name, *_rest) in enumerate(conv[backends[0]]):
        line = f"{name:<24}"
        for b in backends:
            _, fwd, bwd_x, bwd_w = conv[b][i]
            line += f"{fmt(fwd):>16}{fmt(bwd_x + bwd_w):>16}"
        print(line)
    print()
    for i, (name, _) in enumerate(rays[backends[0]]):
        line = f"{name:<24}"
        for b in backends:
            line += f"{fmt(rays[b][i][1]):>16}{'':>16}"
        print(line)
    if len(backends) == 2:
        tot = {b: sum(f + bx + bw for _, f, bx, bw in conv[b]) for b in backends}
        ratio = tot["python"] / tot["cython"]
        print(f"\nconv total (fwd+bwd): cython {tot['cython'] * 1e3:.2f} ms, "
              f"python {tot['python'] * 1e3:.2f} ms  "
              f"({'cython' if ratio > 1 else 'python'} {max(ratio, 1 / ratio):.2f}x faster)")
        rt = {b: sum(t for _, t in rays[b]) for b in backends}
        rratio = rt["python"] / rt["cython"]
        print(f"raycast total: cython {rt['cython'] * 1e3:.3f} ms, "
              f"python {rt['python'] * 1e3:.3f} ms  "
              f"({'cython' if rratio > 1 else 'python'} {max(rratio, 1 / rratio):.2f}x faster)")


if __name__ == "__main__":
    main()
