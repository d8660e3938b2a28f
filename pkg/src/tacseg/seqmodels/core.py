"""Shared differentiable primitives (float64, cache-returning fwd/bwd pairs)."""

from __future__ import annotations

import numpy as np
from scipy.special import erf

_SQRT2 = np.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)
_LN_EPS = 1e-5


def sigmoid(x):
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def gelu_forward(x):
    cdf = 0.5 * (1.0 + erf(x / _SQRT2))
    return x * cdf, (x, cdf)


def gelu_backward(cache, dy):
    x, cdf = cache
    pdf = np.exp(-0.5 * x * x) * _INV_SQRT_2PI
    return dy * (cdf + x * pdf)


def layernorm_forward(x, gamma, beta, eps=_LN_EPS):
    mu = x.mean(axis=-1, keepdims=True)
    var = x.var(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (x - mu) * inv
    return xhat * gamma + beta, (xhat, inv, gamma)


def layernorm_backward(cache, dy):
    """Returns (dx, dgamma, dbeta)."""
    xhat, inv, gamma = cache
    n = xhat.shape[-1]
    dxhat = dy * gamma
    axes = tuple(range(dy.ndim - 1))
    dgamma = (dy * xhat).sum(axis=axes)
    dbeta = dy.sum(axis=axes)
    s1 = dxhat.sum(axis=-1, keepdims=True)
    s2 = (dxhat * xhat).sum(axis=-1, keepdims=True)
    dx = (inv / n) * (n * dxhat - s1 - xhat * s2)
    return dx, dgamma, dbeta


def linear_forward(x, w, b):
    """x: (..., Din) @ w: (Din, Dout) + b."""
    return x @ w + b, x


def linear_backward(cache, w, dy):
    """Returns (dx, dw, db)."""
    x = cache
    xf = x.reshape(-1, x.shape[-1])
    dyf = dy.reshape(-1, dy.shape[-1])
    return dy @ w.T, xf.T @ dyf, dyf.sum(axis=0)


def conv1d_forward(x, w, b, dilation):
    """Dilated 1-D conv over time with symmetric zero padding (same length).

    x: (B, T, Cin); w: (K, Cin, Cout) with K odd; output (B, T, Cout).
    """
    batch, total, cin = x.shape
    k, _, cout = w.shape
    pad = dilation * (k - 1) // 2
    xp = np.zeros((batch, total + 2 * pad, cin), dtype=x.dtype)
    xp[:, pad:pad + total] = x
    cols = np.empty((batch, total, k, cin), dtype=x.dtype)
    for j in range(k):
        cols[:, :, j, :] = xp[:, j * dilation:j * dilation + total, :]
    cols2 = cols.reshape(batch, total, k * cin)
    y = cols2 @ w.reshape(k * cin, cout) + b
    return y, (cols2, x.shape, dilation, pad)


def conv1d_backward(cache, w, dy):
    """Returns (dx, dw, db)."""
    cols2, x_shape, dilation, pad = cache
    batch, total, cin = x_shape
    k, _, cout = w.shape
    dyf = dy.reshape(-1, cout)
    dw = (cols2.reshape(-1, k * cin).T @ dyf).reshape(k, cin, cout)
    db = dyf.sum(axis=0)
    dcols = (dy @ w.reshape(k * cin, cout).T).reshape(batch, total, k, cin)
    dxp = np.zeros((batch, total + 2 * pad, cin), dtype=dy.dtype)
    for j in range(k):
        dxp[:, j * dilation:j * dilation + total, :] += dcols[:, :, j, :]
    return dxp[:, pad:pad + total], dw, db
