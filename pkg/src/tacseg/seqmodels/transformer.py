"""Transformer encoder for frame-wise labeling.

Learned linear input projection, sinusoidal positional encoding, then a stack
of pre-norm encoder layers (multi-head self-attention + GELU feedforward with
residual connections) and a final layer norm. No attention masking: windows
are short and fully bidirectional.
"""

from __future__ import annotations

import numpy as np

from .core import (
    gelu_backward,
    gelu_forward,
    layernorm_backward,
    layernorm_forward,
    linear_backward,
    linear_forward,
)


def param_shapes(cfg) -> dict:
    d = cfg.tr_d_model
    shapes = {"proj.W": (cfg.input_dim, d), "proj.b": (d,)}
    for i in range(cfg.tr_layers):
        base = f"enc{i}"
        shapes[f"{base}.ln1.g"] = (d,)
        shapes[f"{base}.ln1.b"] = (d,)
        for name in ("q", "k", "v", "o"):
            shapes[f"{base}.attn.W{name}"] = (d, d)
            shapes[f"{base}.attn.b{name}"] = (d,)
        shapes[f"{base}.ln2.g"] = (d,)
        shapes[f"{base}.ln2.b"] = (d,)
        shapes[f"{base}.ffn.W1"] = (d, cfg.tr_ffn)
        shapes[f"{base}.ffn.b1"] = (cfg.tr_ffn,)
        shapes[f"{base}.ffn.W2"] = (cfg.tr_ffn, d)
        shapes[f"{base}.ffn.b2"] = (d,)
    shapes["final.ln.g"] = (d,)
    shapes["final.ln.b"] = (d,)
    return shapes


def feature_dim(cfg) -> int:
    return cfg.tr_d_model


def positional_encoding(total: int, d_model: int) -> np.ndarray:
    pos = np.arange(total, dtype=np.float64)[:, None]
    idx = np.arange(0, d_model, 2, dtype=np.float64)
    angles = pos / np.power(10000.0, idx / d_model)
    pe = np.zeros((total, d_model))
    pe[:, 0::2] = np.sin(angles)
    pe[:, 1::2] = np.cos(angles[:, :pe[:, 1::2].shape[1]])
    return pe


def _softmax_last(x):
    shifted = x - x.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def _split_heads(x, heads):
    batch, total, d = x.shape
    return x.reshape(batch, total, heads, d // heads).transpose(0, 2, 1, 3)


def _merge_heads(x):
    batch, heads, total, dh = x.shape
    return x.transpose(0, 2, 1, 3).reshape(batch, total, heads * dh)


def _attention_forward(params, base, u, heads):
    q, cq = linear_forward(u, params[f"{base}.Wq"], params[f"{base}.bq"])
    k, ck = linear_forward(u, params[f"{base}.Wk"], params[f"{base}.bk"])
    v, cv = linear_forward(u, params[f"{base}.Wv"], params[f"{base}.bv"])
    qh, kh, vh = (_split_heads(m, heads) for m in (q, k, v))
    scale = 1.0 / np.sqrt(qh.shape[-1])
    attn = _softmax_last((qh @ kh.transpose(0, 1, 3, 2)) * scale)
    ctx = _merge_heads(attn @ vh)
    out, co = linear_forward(ctx, params[f"{base}.Wo"], params[f"{base}.bo"])
    return out, (cq, ck, cv, co, qh, kh, vh, attn, scale, heads)


def _attention_backward(params, base, cache, dout, grads):
    cq, ck, cv, co, qh, kh, vh, attn, scale, heads = cache
    dctx, dwo, dbo = linear_backward(co, params[f"{base}.Wo"], dout)
    grads[f"{base}.Wo"] = dwo
    grads[f"{base}.bo"] = dbo
    dctx_h = _split_heads(dctx, heads)
    dattn = dctx_h @ vh.transpose(0, 1, 3, 2)
    dvh = attn.transpose(0, 1, 3, 2) @ dctx_h
    dscores = attn * (dattn - (dattn * attn).sum(axis=-1, keepdims=True))
    dscores *= scale
    dqh = dscores @ kh
    dkh = dscores.transpose(0, 1, 3, 2) @ qh
    du = 0.0
    for dxh, nm, cache_lin in ((dqh, "q", cq), (dkh, "k", ck), (dvh, "v", cv)):
        dflat = _merge_heads(dxh)
        dx, dw, db = linear_backward(cache_lin, params[f"{base}.W{nm}"], dflat)
        grads[f"{base}.W{nm}"] = dw
        grads[f"{base}.b{nm}"] = db
        du = du + dx
    return du


def forward(params, x, cfg):
    h, c_proj = linear_forward(x, params["proj.W"], params["proj.b"])
    h = h + positional_encoding(x.shape[1], cfg.tr_d_model)
    layer_caches = []
    for i in range(cfg.tr_layers):
        base = f"enc{i}"
        u, c_ln1 = layernorm_forward(h, params[f"{base}.ln1.g"], params[f"{base}.ln1.b"])
        attn_out, c_attn = _attention_forward(params, f"{base}.attn", u, cfg.tr_heads)
        h = h + attn_out
        v, c_ln2 = layernorm_forward(h, params[f"{base}.ln2.g"], params[f"{base}.ln2.b"])
        f1, c_lin1 = linear_forward(v, params[f"{base}.ffn.W1"], params[f"{base}.ffn.b1"])
        a1, c_gelu = gelu_forward(f1)
        f2, c_lin2 = linear_forward(a1, params[f"{base}.ffn.W2"], params[f"{base}.ffn.b2"])
        h = h + f2
        layer_caches.append((c_ln1, c_attn, c_ln2, c_lin1, c_gelu, c_lin2))
    out, c_lnf = layernorm_forward(h, params["final.ln.g"], params["final.ln.b"])
    return out, (c_proj, layer_caches, c_lnf)


def backward(params, cache, dfeats, grads):
    c_proj, layer_caches, c_lnf = cache
    dh, dg, db = layernorm_backward(c_lnf, dfeats)
    grads["final.ln.g"] = dg
    grads["final.ln.b"] = db
    for i in range(len(layer_caches) - 1, -1, -1):
        base = f"enc{i}"
        c_ln1, c_attn, c_ln2, c_lin1, c_gelu, c_lin2 = layer_caches[i]
        da1, dw2, db2 = linear_backward(c_lin2, params[f"{base}.ffn.W2"], dh)
        grads[f"{base}.ffn.W2"] = dw2
        grads[f"{base}.ffn.b2"] = db2
        df1 = gelu_backward(c_gelu, da1)
        dv, dw1, db1 = linear_backward(c_lin1, params[f"{base}.ffn.W1"], df1)
        grads[f"{base}.ffn.W1"] = dw1
        grads[f"{base}.ffn.b1"] = db1
        dh2, dg2, dbeta2 = layernorm_backward(c_ln2, dv)
        grads[f"{base}.ln2.g"] = dg2
        grads[f"{base}.ln2.b"] = dbeta2
        dh = dh + dh2
        du = _attention_backward(params, f"{base}.attn", c_attn, dh, grads)
        dh1, dg1, dbeta1 = layernorm_backward(c_ln1, du)
        grads[f"{base}.ln1.g"] = dg1
        grads[f"{base}.ln1.b"] = dbeta1
        dh = dh + dh1
    dx, dwp, dbp = linear_backward(c_proj, params["proj.W"], dh)
    grads["proj.W"] = dwp
    grads["proj.b"] = dbp
    return dx
