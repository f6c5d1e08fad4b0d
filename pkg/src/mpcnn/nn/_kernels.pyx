# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels: 3x3 same-padded convolution and 2x2 ceil-mode maxpool.

Batched NCHW layout.  Inputs are copied once into a zero-padded buffer so
every inner loop is a branch-free 9-term row stencil the compiler can
vectorize.  Weight-gradient accumulation runs in double precision.
"""

import numpy as np

cimport numpy as cnp


ctypedef fused real:
    float
    double


cdef inline void _pad_into(real[:, :, :, ::1] x, real[:, :, :, ::1] xp) noexcept nogil:
    cdef Py_ssize_t N = x.shape[0], C = x.shape[1], H = x.shape[2], W = x.shape[3]
    cdef Py_ssize_t n, c, y, i
    cdef const real* src
    cdef real* dst
    for n in range(N):
        for c in range(C):
            for y in range(H):
                src = &x[n, c, y, 0]
                dst = &xp[n, c, y + 1, 1]
                for i in range(W):
                    dst[i] = src[i]


def conv2d_fwd(real[:, :, :, ::1] x, real[:, :, :, ::1] k, real[::1] b):
    """x (N,Ci,H,W), k (Co,Ci,3,3), b (Co) -> out (N,Co,H,W)."""
    cdef Py_ssize_t N = x.shape[0], Ci = x.shape[1], H = x.shape[2], W = x.shape[3]
    cdef Py_ssize_t Co = k.shape[0]
    dtype = np.float32 if real is float else np.float64
    xp_np = np.zeros((N, Ci, H + 2, W + 2), dtype=dtype)
    out_np = np.empty((N, Co, H, W), dtype=dtype)
    cdef real[:, :, :, ::1] xp = xp_np
    cdef real[:, :, :, ::1] out = out_np
    cdef Py_ssize_t n, co, ci, y, i
    cdef real w00, w01, w02, w10, w11, w12, w20, w21, w22, bias
    cdef const real* p0
    cdef const real* p1
    cdef const real* p2
    cdef real* orow

    with nogil:
        _pad_into(x, xp)
        for n in range(N):
            for co in range(Co):
                bias = b[co]
                for y in range(H):
                    orow = &out[n, co, y, 0]
                    for i in range(W):
                        orow[i] = bias
            for y in range(H):
                for ci in range(Ci):
                    p0 = &xp[n, ci, y, 0]
                    p1 = &xp[n, ci, y + 1, 0]
                    p2 = &xp[n, ci, y + 2, 0]
                    for co in range(Co):
                        w00 = k[co, ci, 0, 0]; w01 = k[co, ci, 0, 1]; w02 = k[co, ci, 0, 2]
                        w10 = k[co, ci, 1, 0]; w11 = k[co, ci, 1, 1]; w12 = k[co, ci, 1, 2]
                        w20 = k[co, ci, 2, 0]; w21 = k[co, ci, 2, 1]; w22 = k[co, ci, 2, 2]
                        orow = &out[n, co, y, 0]
                        for i in range(W):
                            orow[i] += (
                                w00 * p0[i] + w01 * p0[i + 1] + w02 * p0[i + 2]
                                + w10 * p1[i] + w11 * p1[i + 1] + w12 * p1[i + 2]
                                + w20 * p2[i] + w21 * p2[i + 1] + w22 * p2[i + 2]
                            )
    return out_np


def conv2d_bwd_x(real[:, :, :, ::1] gout, real[:, :, :, ::1] k):
    """gout (N,Co,H,W), k (Co,Ci,3,3) -> gx (N,Ci,H,W).

    Same stencil as the forward pass run on padded gout with the kernel
    spatially flipped and its channel axes transposed.
    """
    cdef Py_ssize_t N = gout.shape[0], Co = gout.shape[1]
    cdef Py_ssize_t H = gout.shape[2], W = gout.shape[3]
    cdef Py_ssize_t Ci = k.shape[1]
    dtype = np.float32 if real is float else np.float64
    gp_np = np.zeros((N, Co, H + 2, W + 2), dtype=dtype)
    gx_np = np.zeros((N, Ci, H, W), dtype=dtype)
    cdef real[:, :, :, ::1] gp = gp_np
    cdef real[:, :, :, ::1] gx = gx_np
    cdef Py_ssize_t n, co, ci, y, i
    cdef real w00, w01, w02, w10, w11, w12, w20, w21, w22
    cdef const real* p0
    cdef const real* p1
    cdef const real* p2
    cdef real* orow

    with nogil:
        _pad_into(gout, gp)
        for n in range(N):
            for y in range(H):
                for co in range(Co):
                    p0 = &gp[n, co, y, 0]
                    p1 = &gp[n, co, y + 1, 0]
                    p2 = &gp[n, co, y + 2, 0]
                    for ci in range(Ci):
                        # flipped: stencil tap (dy,dx) uses k[2-dy, 2-dx]
                        w00 = k[co, ci, 2, 2]; w01 = k[co, ci, 2, 1]; w02 = k[co, ci, 2, 0]
                        w10 = k[co, ci, 1, 2]; w11 = k[co, ci, 1, 1]; w12 = k[co, ci, 1, 0]
                        w20 = k[co, ci, 0, 2]; w21 = k[co, ci, 0, 1]; w22 = k[co, ci, 0, 0]
                        orow = &gx[n, ci, y, 0]
                        for i in range(W):
                            orow[i] += (
                                w00 * p0[i] + w01 * p0[i + 1] + w02 * p0[i + 2]
                                + w10 * p1[i] + w11 * p1[i + 1] + w12 * p1[i + 2]
                                + w20 * p2[i] + w21 * p2[i + 1] + w22 * p2[i + 2]
                            )
    return gx_np


def conv2d_bwd_k(real[:, :, :, ::1] x, real[:, :, :, ::1] gout, Py_ssize_t co_count):
    """x (N,Ci,H,W), gout (N,Co,H,W) -> (gk (Co,Ci,3,3), gb (Co))."""
    cdef Py_ssize_t N = x.shape[0], Ci = x.shape[1], H = x.shape[2], W = x.shape[3]
    cdef Py_ssize_t Co = co_count
    dtype = np.float32 if real is float else np.float64
    xp_np = np.zeros((N, Ci, H + 2, W + 2), dtype=dtype)
    acc_np = np.zeros((Co, Ci, 9), dtype=np.float64)
    gb_acc_np = np.zeros(Co, dtype=np.float64)
    cdef real[:, :, :, ::1] xp = xp_np
    cdef double[:, :, ::1] acc = acc_np
    cdef double[::1] gb_acc = gb_acc_np
    cdef Py_ssize_t n, co, ci, y, i
    cdef double a00, a01, a02, a10, a11, a12, a20, a21, a22, bsum
    cdef const real* p0
    cdef const real* p1
    cdef const real* p2
    cdef const real* grow
    cdef double* arow

    with nogil:
        _pad_into(x, xp)
        for n in range(N):
            for y in range(H):
                for co in range(Co):
                    grow = &gout[n, co, y, 0]
                    for ci in range(Ci):
                        p0 = &xp[n, ci, y, 0]
                        p1 = &xp[n, ci, y + 1, 0]
                        p2 = &xp[n, ci, y + 2, 0]
                        a00 = 0; a01 = 0; a02 = 0
                        a10 = 0; a11 = 0; a12 = 0
                        a20 = 0; a21 = 0; a22 = 0
                        for i in range(W):
                            a00 += grow[i] * p0[i]
                            a01 += grow[i] * p0[i + 1]
                            a02 += grow[i] * p0[i + 2]
                            a10 += grow[i] * p1[i]
                            a11 += grow[i] * p1[i + 1]
                            a12 += grow[i] * p1[i + 2]
                            a20 += grow[i] * p2[i]
                            a21 += grow[i] * p2[i + 1]
                            a22 += grow[i] * p2[i + 2]
                        arow = &acc[co, ci, 0]
                        arow[0] += a00; arow[1] += a01; arow[2] += a02
                        arow[3] += a10; arow[4] += a11; arow[5] += a12
                        arow[6] += a20; arow[7] += a21; arow[8] += a22
                for co in range(Co):
                    grow = &gout[n, co, y, 0]
                    bsum = 0
                    for i in range(W):
                        bsum += grow[i]
                    gb_acc[co] += bsum
    gk = acc_np.reshape(Co, Ci, 3, 3).astype(dtype)
    gb = gb_acc_np.astype(dtype)
    return gk, gb


def maxpool2d_fwd(real[:, :, :, ::1] x):
    """2x2/stride-2 ceil-mode max pool; returns (out, argmax flat h*W+w)."""
    cdef Py_ssize_t N = x.shape[0], C = x.shape[1], H = x.shape[2], W = x.shape[3]
    cdef Py_ssize_t Ho = (H + 1) // 2, Wo = (W + 1) // 2
    out_np = np.empty((N, C, Ho, Wo), dtype=np.float32 if real is float else np.float64)
    idx_np = np.empty((N, C, Ho, Wo), dtype=np.int64)
    cdef real[:, :, :, ::1] out = out_np
    cdef cnp.int64_t[:, :, :, ::1] idx = idx_np
    cdef Py_ssize_t n, c, i, j, h0, h1, w0, w1, hh, ww, best
    cdef real v, m

    with nogil:
        for n in range(N):
            for c in range(C):
                for i in range(Ho):
                    h0 = 2 * i
                    h1 = h0 + 2 if h0 + 2 < H else H
                    for j in range(Wo):
                        w0 = 2 * j
                        w1 = w0 + 2 if w0 + 2 < W else W
                        m = x[n, c, h0, w0]
                        best = h0 * W + w0
                        for hh in range(h0, h1):
                            for ww in range(w0, w1):
                                v = x[n, c, hh, ww]
                                if v > m:
                                    m = v
                                    best = hh * W + ww
                        out[n, c, i, j] = m
                        idx[n, c, i, j] = best
    return out_np, idx_np


def maxpool2d_bwd(real[:, :, :, ::1] gout, cnp.int64_t[:, :, :, ::1] idx,
                  Py_ssize_t H, Py_ssize_t W):
    """Routes each pooled gradient back to its argmax cell."""
    cdef Py_ssize_t N = gout.shape[0], C = gout.shape[1]
    cdef Py_ssize_t Ho = gout.shape[2], Wo = gout.shape[3]
    gx_np = np.zeros((N, C, H, W), dtype=np.float32 if real is float else np.float64)
    cdef real[:, :, :, ::1] gx = gx_np
    cdef Py_ssize_t n, c, i, j, flat

    with nogil:
        for n in range(N):
            for c in range(C):
                for i in range(Ho):
                    for j in range(Wo):
                        flat = idx[n, c, i, j]
                        gx[n, c, flat // W, flat % W] += gout[n, c, i, j]
    return gx_np
