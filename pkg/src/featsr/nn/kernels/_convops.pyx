# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled im2col / col2im, the hot inner kernels of conv2d."""

import numpy as np

BACKEND_NAME = "cython"

ctypedef fused real:
    float
    double


def conv_out_hw(h, w, k, stride, pad):
    return (h + 2 * pad - k) // stride + 1, (w + 2 * pad - k) // stride + 1


def im2col(x, int k, int stride, int pad):
    return _im2col(np.ascontiguousarray(x), k, stride, pad)


def col2im(cols, xshape, int k, int stride, int pad):
    return _col2im(np.ascontiguousarray(cols), xshape, k, stride, pad)


def _im2col(real[:, :, :, ::1] x, int k, int stride, int pad):
    cdef int n = x.shape[0], c = x.shape[1], h = x.shape[2], w = x.shape[3]
    cdef int ho = (h + 2 * pad - k) // stride + 1
    cdef int wo = (w + 2 * pad - k) // stride + 1
    dtype = np.float32 if real is float else np.float64
    out = np.zeros((n, c * k * k, ho * wo), dtype=dtype)
    cdef real[:, :, ::1] cols = out
    cdef int b, ch, ki, kj, i, j, row, hi, wi
    with nogil:
        for b in range(n):
            for ch in range(c):
                for ki in range(k):
                    for kj in range(k):
                        row = (ch * k + ki) * k + kj
                        for i in range(ho):
                            hi = i * stride + ki - pad
                            if hi < 0 or hi >= h:
                                continue
                            for j in range(wo):
                                wi = j * stride + kj - pad
                                if wi < 0 or wi >= w:
                                    continue
                                cols[b, row, i * wo + j] = x[b, ch, hi, wi]
    return out


def _col2im(real[:, :, ::1] cols, xshape, int k, int stride, int pad):
    cdef int n = xshape[0], c = xshape[1], h = xshape[2], w = xshape[3]
    cdef int ho = (h + 2 * pad - k) // stride + 1
    cdef int wo = (w + 2 * pad - k) // stride + 1
    dtype = np.float32 if real is float else np.float64
    out = np.zeros((n, c, h, w), dtype=dtype)
    cdef real[:, :, :, ::1] dx = out
    cdef int b, ch, ki, kj, i, j, row, hi, wi
    with nogil:
        for b in range(n):
            for ch in range(c):
                for ki in range(k):
                    for kj in range(k):
                        row = (ch * k + ki) * k + kj
                        for i in range(ho):
                            hi = i * stride + ki - pad
                            if hi < 0 or hi >= h:
                                continue
                            for j in range(wo):
                                wi = j * stride + kj - pad
                                if wi < 0 or wi >= w:
                                    continue
                                dx[b, ch, hi, wi] += cols[b, row, i * wo + j]
    return out
