"""Compare the compiled and pure-numpy convolution kernels.

Usage: python3 benchmarks/bench_conv.py [--repeats N]

Times im2col/col2im round trips and a full conv2d forward+backward on a
few training-realistic shapes, for both backends, and verifies they agree
bitwise on identical inputs.
"""

import argparse
import time

import numpy as np

from featsr.nn import Tensor, conv2d
from featsr.nn.kernels import _pure

try:
    from featsr.nn.kernels import _convops
except ImportError:
    _convops = None

SHAPES = [
    # (N, C, H, W, Cout, k, stride, pad)    where it shows up
    (10, 3, 32, 32, 64, 9, 1, 4),  # generator head conv on an HR-sized map
    (10, 64, 8, 8, 64, 3, 1, 1),  # residual-block conv
    (10, 64, 32, 32, 64, 3, 2, 1),  # discriminator stride-2 block
    (10, 256, 8, 8, 512, 3, 1, 1),  # deep discriminator block
]


def time_kernel(mod, x, k, stride, pad, repeats):
    cols = mod.im2col(x, k, stride, pad)
    g = np.ones_like(cols)
    t0 = time.perf_counter()
    for _ in range(repeats):
        cols = mod.im2col(x, k, stride, pad)
        mod.col2im(g, x.shape, k, stride, pad)
    return (time.perf_counter() - t0) / repeats, cols


def time_conv(x, w, b, stride, pad, repeats):
    t0 = time.perf_counter()
    for _ in range(repeats):
        xt = Tensor._make(x)
        xt.requires_grad = True
        out = conv2d(xt, Tensor(w, requires_grad=True), Tensor(b, requires_grad=True), stride, pad)
        out.sum().backward()
    return (time.perf_counter() - t0) / repeats


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeats", type=int, default=5)
    args = ap.parse_args()

    if _convops is None:
        print("compiled backend unavailable; build with: pip install -e . --no-build-isolation")

    rng = np.random.default_rng(0)
    print(f"{'shape':<34} {'pure im2col+col2im':>20} {'cython':>12} {'speedup':>8}")
    for n, c, h, w, cout, k, stride, pad in SHAPES:
        x = rng.normal(size=(n, c, h, w)).astype(np.float32)
        t_pure, cols_pure = time_kernel(_pure, x, k, stride, pad, args.repeats)
        line = f"N{n} C{c} {h}x{w} -> C{cout} k{k} s{stride}"
        if _convops is not None:
            t_cy, cols_cy = time_kernel(_convops, x, k, stride, pad, args.repeats)
            assert np.array_equal(cols_pure, cols_cy), "backends disagree"
            print(f"{line:<34} {t_pure * 1e3:>17.2f} ms {t_cy * 1e3:>9.2f} ms {t_pure / t_cy:>7.2f}x")
        else:
            print(f"{line:<34} {t_pure * 1e3:>17.2f} ms {'-':>12} {'-':>8}")

        weight = rng.normal(size=(cout, c, k, k)).astype(np.float32) * 0.01
        bias = np.zeros(cout, np.float32)
        t_full = time_conv(x, weight, bias, stride, pad, args.repeats)
        print(f"{'  full conv2d fwd+bwd (active backend)':<34} {t_full * 1e3:>17.2f} ms")


if __name__ == "__main__":
    main()
