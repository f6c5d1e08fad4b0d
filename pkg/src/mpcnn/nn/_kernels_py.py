"""NumPy fallback for the compiled kernels (same contracts, BLAS-backed).

Stride-1 3x3 same-padded convolution lets every pass be phrased as an
im2col matrix product, so no scatter (col2im) step is ever needed.
"""

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def _cols(x):
    """(N,C,H,W) -> zero-padded patch matrix (N*H*W, C*9)."""
    n, c, h, w = x.shape
    xp = np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1)))
    win = sliding_window_view(xp, (3, 3), axis=(2, 3))  # (N,C,H,W,3,3)
    return np.ascontiguousarray(win.transpose(0, 2, 3, 1, 4, 5)).reshape(
        n * h * w, c * 9
    )


def conv2d_fwd(x, k, b):
    n, _, h, w = x.shape
    co = k.shape[0]
    out = _cols(x) @ k.reshape(co, -1).T + b
    return np.ascontiguousarray(out.reshape(n, h, w, co).transpose(0, 3, 1, 2))


def conv2d_bwd_x(gout, k):
    co, ci = k.shape[0], k.shape[1]
    # dL/dx is the same-padded correlation of gout with spatially flipped,
    # channel-transposed kernels.
    kt = np.ascontiguousarray(k[:, :, ::-1, ::-1].transpose(1, 0, 2, 3))
    return conv2d_fwd(gout, kt, np.zeros(ci, dtype=gout.dtype))


def conv2d_bwd_k(x, gout, co_count):
    n, ci, h, w = x.shape
    cols = _cols(x)  # (N*H*W, Ci*9)
    g = gout.transpose(0, 2, 3, 1).reshape(n * h * w, co_count)
    gk = (g.T @ cols).reshape(co_count, ci, 3, 3)
    gb = gout.sum(axis=(0, 2, 3))
    return gk, gb


def maxpool2d_fwd(x):
    n, c, h, w = x.shape
    ho, wo = (h + 1) // 2, (w + 1) // 2
    xp = np.pad(
        x, ((0, 0), (0, 0), (0, 2 * ho - h), (0, 2 * wo - w)), constant_values=-np.inf
    )
    win = xp.reshape(n, c, ho, 2, wo, 2).transpose(0, 1, 2, 4, 3, 5).reshape(
        n, c, ho, wo, 4
    )
    local = win.argmax(axis=-1)  # first max in row-major window order
    out = np.take_along_axis(win, local[..., None], axis=-1)[..., 0]
    # Map window-local (0..3) argmax back to flat h*W+w input coordinates.
    ii = 2 * np.arange(ho)[:, None] + (local // 2)
    jj = 2 * np.arange(wo)[None, :] + (local % 2)
    idx = (ii * w + jj).astype(np.int64)
    return np.ascontiguousarray(out), idx


def maxpool2d_bwd(gout, idx, h, w):
    n, c = gout.shape[:2]
    gx = np.zeros((n, c, h * w), dtype=gout.dtype)
    np.add.at(
        gx,
        (np.arange(n)[:, None, None, None], np.arange(c)[None, :, None, None], idx),
        gout,
    )
    return gx.reshape(n, c, h, w)
