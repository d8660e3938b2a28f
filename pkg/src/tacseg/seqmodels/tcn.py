"""Temporal convolutional network.

Residual blocks of dilated 1-D convolutions (dilation doubling per block),
layer normalization, and GELU. Padding is symmetric, not causal: the labeler
runs offline on complete windows, and same-length outputs keep the frame
alignment trivial. A 1x1 projection carries the residual when the channel
count changes (first block only).
"""

from __future__ import annotations

from .core import (
    conv1d_backward,
    conv1d_forward,
    gelu_backward,
    gelu_forward,
    layernorm_backward,
    layernorm_forward,
)


def param_shapes(cfg) -> dict:
    shapes = {}
    cin = cfg.input_dim
    cout = cfg.tcn_channels
    for b in range(cfg.tcn_blocks):
        base = f"block{b}"
        shapes[f"{base}.conv.W"] = (cfg.tcn_kernel, cin, cout)
        shapes[f"{base}.conv.b"] = (cout,)
        shapes[f"{base}.ln.g"] = (cout,)
        shapes[f"{base}.ln.b"] = (cout,)
        if cin != cout:
            shapes[f"{base}.res.W"] = (cin, cout)
        cin = cout
    return shapes


def feature_dim(cfg) -> int:
    return cfg.tcn_channels


def forward(params, x, cfg):
    caches = []
    h = x
    for b in range(cfg.tcn_blocks):
        base = f"block{b}"
        dilation = 2 ** b
        y, c_conv = conv1d_forward(h, params[f"{base}.conv.W"],
                                   params[f"{base}.conv.b"], dilation)
        y, c_ln = layernorm_forward(y, params[f"{base}.ln.g"], params[f"{base}.ln.b"])
        y, c_gelu = gelu_forward(y)
        res_name = f"{base}.res.W"
        if res_name in params:
            res = h @ params[res_name]
            c_res = h
        else:
            res = h
            c_res = None
        h = y + res
        caches.append((c_conv, c_ln, c_gelu, c_res))
    return h, caches


def backward(params, caches, dfeats, grads):
    dh = dfeats
    for b in range(len(caches) - 1, -1, -1):
        base = f"block{b}"
        c_conv, c_ln, c_gelu, c_res = caches[b]
        dy = gelu_backward(c_gelu, dh)
        dy, dg, dbeta = layernorm_backward(c_ln, dy)
        grads[f"{base}.ln.g"] = dg
        grads[f"{base}.ln.b"] = dbeta
        dx, dw, db = conv1d_backward(c_conv, params[f"{base}.conv.W"], dy)
        grads[f"{base}.conv.W"] = dw
        grads[f"{base}.conv.b"] = db
        if c_res is not None:
            w = params[f"{base}.res.W"]
            hin = c_res
            grads[f"{base}.res.W"] = (
                hin.reshape(-1, hin.shape[-1]).T @ dh.reshape(-1, dh.shape[-1]))
            dx += dh @ w.T
        else:
            dx += dh
        dh = dx
    return dh
