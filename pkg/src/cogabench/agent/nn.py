"""Layer primitives for the Q network: conv, pool, batch norm, linear.

Everything is plain numpy in float64.  Forward functions return
``(out, cache)``; backward functions consume the cache and return input
and parameter gradients.  Convolutions are fixed at 3x3, stride 1,
pad 1 (the only shape the network uses), implemented via im2col so both
directions reduce to one big matmul.
"""

from __future__ import annotations

import numpy as np

KSIZE = 3
PAD = 1
BN_EPS = 1e-5


def _im2col(x: np.ndarray) -> np.ndarray:
    """(B, C, H, W) -> (B*H*W, 9*C) patches for a 3x3 / stride 1 / pad 1 conv.

    Patch layout is [ky, kx, ci] so the buffer fills with nine bulk slice
    copies, which beats copying a transposed sliding-window view.
    """
    b, c, h, w = x.shape
    xp = np.pad(x, ((0, 0), (0, 0), (PAD, PAD), (PAD, PAD)))
    cols = np.empty((b, h, w, KSIZE * KSIZE * c), dtype=x.dtype)
    for ky in range(KSIZE):
        for kx in range(KSIZE):
            k = ky * KSIZE + kx
            cols[..., k * c:(k + 1) * c] = xp[:, :, ky:ky + h, kx:kx + w].transpose(0, 2, 3, 1)
    return cols.reshape(b * h * w, KSIZE * KSIZE * c)


def _wmat(w: np.ndarray) -> np.ndarray:
    """(C_out, C_in, 3, 3) -> (C_out, 9*C_in) matching the _im2col layout."""
    c_out, c_in = w.shape[0], w.shape[1]
    return w.transpose(0, 2, 3, 1).reshape(c_out, KSIZE * KSIZE * c_in)


def conv_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray):
    """x: (B, C_in, H, W), w: (C_out, C_in, 3, 3), b: (C_out,)."""
    bsz, c_in, h, wd = x.shape
    c_out = w.shape[0]
    cols = _im2col(x)
    out = cols @ _wmat(w).T + b
    out = out.reshape(bsz, h, wd, c_out).transpose(0, 3, 1, 2)
    cache = (cols, w, x.shape)
    return np.ascontiguousarray(out), cache


def conv_backward(dout: np.ndarray, cache, need_dx: bool = True):
    cols, w, x_shape = cache
    bsz, c_in, h, wd = x_shape
    c_out = w.shape[0]
    dout_r = dout.transpose(0, 2, 3, 1).reshape(bsz * h * wd, c_out)
    dw = (dout_r.T @ cols).reshape(c_out, KSIZE, KSIZE, c_in).transpose(0, 3, 1, 2)
    db = dout_r.sum(axis=0)
    if not need_dx:  # first layer: nothing upstream consumes dx
        return None, dw, db
    # dx is a full correlation of dout with the flipped kernel; reuse im2col
    # on dout and fold the flip into the weight matrix.
    dcols = _im2col(dout)  # (B*H*W, 9*C_out) in [ky, kx, co] order
    wback = w[:, :, ::-1, ::-1].transpose(2, 3, 0, 1).reshape(
        KSIZE * KSIZE * c_out, c_in
    )
    dx = (dcols @ wback).reshape(bsz, h, wd, c_in).transpose(0, 3, 1, 2)
    return np.ascontiguousarray(dx), dw, db


def relu_forward(x: np.ndarray):
    out = np.maximum(x, 0.0)
    return out, (x > 0.0)


def relu_backward(dout: np.ndarray, cache) -> np.ndarray:
    return dout * cache


def maxpool_forward(x: np.ndarray):
    """2x2 / stride 2 max pool; odd trailing rows/cols are dropped.

    Works on four strided quadrant views instead of materializing
    (B, C, Hp, Wp, 4) windows; profiling showed the argmax route spending
    most of its time on the copy.
    """
    b, c, h, w = x.shape
    hp, wp = h // 2, w // 2
    xc = x[:, :, : hp * 2, : wp * 2]
    q00 = xc[:, :, 0::2, 0::2]
    q01 = xc[:, :, 0::2, 1::2]
    q10 = xc[:, :, 1::2, 0::2]
    q11 = xc[:, :, 1::2, 1::2]
    out = np.maximum(np.maximum(q00, q01), np.maximum(q10, q11))
    cache = ((q00, q01, q10, q11), out, x.shape)
    return out, cache


def maxpool_backward(dout: np.ndarray, cache) -> np.ndarray:
    quads, out, x_shape = cache
    hp, wp = out.shape[2], out.shape[3]
    dx = np.zeros(x_shape, dtype=dout.dtype)
    dxc = dx[:, :, : hp * 2, : wp * 2]
    slots = ((0, 0), (0, 1), (1, 0), (1, 1))
    # ties route to the first maximal cell in row-major window order
    unclaimed = np.ones(out.shape, dtype=bool)
    for q, (dy, dxs) in zip(quads, slots):
        hit = (q == out) & unclaimed
        dxc[:, :, dy::2, dxs::2] = np.where(hit, dout, 0)
        unclaimed &= ~hit
    return dx


def batchnorm_forward(x: np.ndarray, gamma: np.ndarray, beta: np.ndarray,
                      running_mean: np.ndarray, running_var: np.ndarray,
                      train: bool, momentum: float = 0.1):
    """Per-channel batch norm over (B, C, H, W).

    In train mode the running stats are updated in place.
    """
    if train:
        mean = x.mean(axis=(0, 2, 3))
        var = x.var(axis=(0, 2, 3))
        running_mean *= 1.0 - momentum
        running_mean += momentum * mean
        running_var *= 1.0 - momentum
        running_var += momentum * var
    else:
        mean = running_mean
        var = running_var
    inv_std = 1.0 / np.sqrt(var + BN_EPS)
    xhat = (x - mean[None, :, None, None]) * inv_std[None, :, None, None]
    out = gamma[None, :, None, None] * xhat + beta[None, :, None, None]
    cache = (xhat, inv_std, gamma, train)
    return out, cache


def batchnorm_backward(dout: np.ndarray, cache):
    xhat, inv_std, gamma, train = cache
    dgamma = (dout * xhat).sum(axis=(0, 2, 3))
    dbeta = dout.sum(axis=(0, 2, 3))
    dxhat = dout * gamma[None, :, None, None]
    if not train:
        dx = dxhat * inv_std[None, :, None, None]
        return dx, dgamma, dbeta
    # train mode: account for the dependence of batch mean/var on x
    n = dout.shape[0] * dout.shape[2] * dout.shape[3]
    sum_dxhat = dxhat.sum(axis=(0, 2, 3))
    sum_dxhat_xhat = (dxhat * xhat).sum(axis=(0, 2, 3))
    dx = (
        dxhat
        - sum_dxhat[None, :, None, None] / n
        - xhat * sum_dxhat_xhat[None, :, None, None] / n
    ) * inv_std[None, :, None, None]
    return dx, dgamma, dbeta


def linear_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray):
    """x: (B, D_in), w: (D_in, D_out)."""
    return x @ w + b, (x, w)


def linear_backward(dout: np.ndarray, cache):
    x, w = cache
    dw = x.T @ dout
    db = dout.sum(axis=0)
    dx = dout @ w.T
    return dx, dw, db


def he_init(rng: np.random.Generator, shape: tuple, fan_in: int) -> np.ndarray:
    std = np.sqrt(2.0 / fan_in)
    return rng.normal(0.0, std, size=shape)
