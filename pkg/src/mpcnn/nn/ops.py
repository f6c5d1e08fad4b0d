"""Functional forward/backward operations of the network engine.

All spatial ops take NCHW batches; a single sample (C,H,W) is accepted
and returned without the batch axis.  Convolutions are 3x3 with zero
"same" padding, so spatial size only changes in pooling.
"""

import numpy as np

from . import backend

LOGLOSS_CLAMP = 1e-12


def _as_batch(x):
    if x.ndim == 3:
        return x[None], True
    if x.ndim == 4:
        return x, False
    raise ValueError(f"expected 3D or 4D input, got shape {x.shape}")


def _unbatch(x, squeeze):
    return x[0] if squeeze else x


def conv2d_forward(x, kernels, bias):
    """Same-padded 3x3 cross-correlation plus per-channel bias."""
    xb, squeeze = _as_batch(x)
    if kernels.shape[2:] != (3, 3):
        raise ValueError(f"kernels must be 3x3, got {kernels.shape[2:]}")
    if kernels.shape[1] != xb.shape[1]:
        raise ValueError(
            f"channel mismatch: input has {xb.shape[1]}, kernels expect {kernels.shape[1]}"
        )
    out = backend.kernels.conv2d_fwd(
        np.ascontiguousarray(xb), np.ascontiguousarray(kernels), bias
    )
    return _unbatch(out, squeeze)


def conv2d_backward(x, kernels, grad_out):
    """Exact gradients of conv2d_forward: (grad_x, grad_kernels, grad_bias)."""
    xb, squeeze = _as_batch(x)
    gb_, _ = _as_batch(grad_out)
    if gb_.shape[0] != xb.shape[0] or gb_.shape[1] != kernels.shape[0]:
        raise ValueError(
            f"grad_out shape {grad_out.shape} inconsistent with kernels {kernels.shape}"
        )
    k = np.ascontiguousarray(kernels)
    gout = np.ascontiguousarray(gb_)
    grad_x = backend.kernels.conv2d_bwd_x(gout, k)
    grad_k, grad_b = backend.kernels.conv2d_bwd_k(
        np.ascontiguousarray(xb), gout, kernels.shape[0]
    )
    return _unbatch(grad_x, squeeze), grad_k, grad_b


def maxpool2d_forward(x):
    """2x2/stride-2 ceil-mode max pooling; returns (out, argmax records)."""
    xb, squeeze = _as_batch(x)
    out, idx = backend.kernels.maxpool2d_fwd(np.ascontiguousarray(xb))
    return _unbatch(out, squeeze), _unbatch(idx, squeeze)


def maxpool2d_backward(x, argmax, grad_out):
    """Routes each pooled gradient to its argmax cell (first-index ties)."""
    xb, squeeze = _as_batch(x)
    gout, _ = _as_batch(grad_out)
    idx = argmax if argmax.ndim == 4 else argmax[None]
    gx = backend.kernels.maxpool2d_bwd(
        np.ascontiguousarray(gout), np.ascontiguousarray(idx), xb.shape[2], xb.shape[3]
    )
    return _unbatch(gx, squeeze)


def dense_forward(x, weights, bias):
    """Affine map: weights (m,n) @ x (n) + bias (m); batched over rows."""
    if x.shape[-1] != weights.shape[1]:
        raise ValueError(f"shape mismatch: x {x.shape} vs weights {weights.shape}")
    return x @ weights.T + bias


def dense_backward(x, weights, grad_out):
    """(grad_x, grad_weights, grad_bias) of the affine map."""
    if grad_out.shape[-1] != weights.shape[0]:
        raise ValueError(
            f"shape mismatch: grad_out {grad_out.shape} vs weights {weights.shape}"
        )
    grad_x = grad_out @ weights
    if x.ndim == 1:
        grad_w = np.outer(grad_out, x)
        grad_b = grad_out.copy()
    else:
        grad_w = grad_out.T @ x
        grad_b = grad_out.sum(axis=0)
    return grad_x, grad_w, grad_b


def relu(x):
    return np.maximum(x, 0)


def relu_backward(x, grad_out):
    """Gradient convention: d relu/dx = 0 at x = 0."""
    return np.where(x > 0, grad_out, 0)


def sigmoid(x):
    """Numerically stable logistic; never overflows for finite input."""
    x = np.asarray(x)
    out = np.empty_like(x, dtype=x.dtype if x.dtype.kind == "f" else np.float64)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def sigmoid_backward(out, grad_out):
    # Clamp to the open interval so saturated float outputs (p == 1.0
    # exactly) still pair with the clamped log-loss gradient.
    p = np.clip(np.asarray(out, dtype=np.float64), LOGLOSS_CLAMP, 1 - LOGLOSS_CLAMP)
    g = grad_out * p * (1.0 - p)
    return g.astype(np.asarray(out).dtype, copy=False)


def logloss(p, y):
    """Binary cross-entropy with inputs clamped to [1e-12, 1-1e-12].

    Returns (loss, dloss/dp); both elementwise for array inputs.
    """
    pc = np.clip(np.asarray(p, dtype=np.float64), LOGLOSS_CLAMP, 1 - LOGLOSS_CLAMP)
    y = np.asarray(y, dtype=np.float64)
    loss = -(y * np.log(pc) + (1.0 - y) * np.log1p(-pc))
    grad = (pc - y) / (pc * (1.0 - pc))
    return loss, grad


def he_uniform_init(shape, rng, dtype=np.float64):
    """Uniform on +-sqrt(6/fan_in); fan-in inferred from the shape rank."""
    shape = tuple(shape)
    if len(shape) == 4:
        fan_in = shape[1] * shape[2] * shape[3]
    elif len(shape) == 2:
        fan_in = shape[1]
    elif len(shape) == 1:
        fan_in = shape[0]
    else:
        raise ValueError(f"cannot infer fan-in for shape {shape}")
    bound = np.sqrt(6.0 / fan_in)
    return rng.uniform(-bound, bound, size=shape).astype(dtype)
