"""Stacked bidirectional LSTM.

Each layer runs one LSTM scan forward in time and one backward, concatenating
the two hidden sequences, so every frame's representation reflects both past
and future context. Gate layout in the fused matrices is [i, f, g, o].
"""

from __future__ import annotations

import numpy as np

from .core import sigmoid


def param_shapes(cfg) -> dict:
    shapes = {}
    din = cfg.input_dim
    hid = cfg.bilstm_hidden
    for layer in range(cfg.bilstm_layers):
        for d in ("fw", "bw"):
            base = f"lstm{layer}.{d}"
            shapes[f"{base}.Wx"] = (din, 4 * hid)
            shapes[f"{base}.Wh"] = (hid, 4 * hid)
            shapes[f"{base}.b"] = (4 * hid,)
        din = 2 * hid
    return shapes


def feature_dim(cfg) -> int:
    return 2 * cfg.bilstm_hidden


def _scan_forward(x, wx, wh, b):
    """One direction over (B, T, Din); returns hidden sequence + cache."""
    batch, total, _ = x.shape
    hid = wh.shape[0]
    xw = x @ wx + b  # input contributions precomputed for the whole sequence
    gates = np.empty((batch, total, 4 * hid))
    cells = np.empty((batch, total, hid))
    tanh_c = np.empty((batch, total, hid))
    hidden = np.empty((batch, total, hid))
    h = np.zeros((batch, hid))
    c = np.zeros((batch, hid))
    for t in range(total):
        a = xw[:, t] + h @ wh
        i = sigmoid(a[:, :hid])
        f = sigmoid(a[:, hid:2 * hid])
        g = np.tanh(a[:, 2 * hid:3 * hid])
        o = sigmoid(a[:, 3 * hid:])
        c = f * c + i * g
        tc = np.tanh(c)
        h = o * tc
        gates[:, t, :hid] = i
        gates[:, t, hid:2 * hid] = f
        gates[:, t, 2 * hid:3 * hid] = g
        gates[:, t, 3 * hid:] = o
        cells[:, t] = c
        tanh_c[:, t] = tc
        hidden[:, t] = h
    return hidden, (x, gates, cells, tanh_c, hidden)


def _scan_backward(cache, wx, wh, dh_seq):
    """BPTT for one direction; returns (dx, dWx, dWh, db)."""
    x, gates, cells, tanh_c, hidden = cache
    batch, total, hid = hidden.shape
    dwx = np.zeros_like(wx)
    dwh = np.zeros_like(wh)
    db = np.zeros(4 * hid)
    dx = np.empty_like(x)
    dh_next = np.zeros((batch, hid))
    dc_next = np.zeros((batch, hid))
    da = np.empty((batch, 4 * hid))
    for t in range(total - 1, -1, -1):
        i = gates[:, t, :hid]
        f = gates[:, t, hid:2 * hid]
        g = gates[:, t, 2 * hid:3 * hid]
        o = gates[:, t, 3 * hid:]
        tc = tanh_c[:, t]
        dh = dh_seq[:, t] + dh_next
        dc = dh * o * (1.0 - tc * tc) + dc_next
        c_prev = cells[:, t - 1] if t > 0 else 0.0
        h_prev = hidden[:, t - 1] if t > 0 else None
        da[:, :hid] = dc * g * i * (1.0 - i)
        da[:, hid:2 * hid] = dc * c_prev * f * (1.0 - f)
        da[:, 2 * hid:3 * hid] = dc * i * (1.0 - g * g)
        da[:, 3 * hid:] = dh * tc * o * (1.0 - o)
        dwx += x[:, t].T @ da
        if h_prev is not None:
            dwh += h_prev.T @ da
        db += da.sum(axis=0)
        dx[:, t] = da @ wx.T
        dh_next = da @ wh.T
        dc_next = dc * f
    return dx, dwx, dwh, db


def forward(params, x, cfg):
    caches = []
    h = x
    for layer in range(cfg.bilstm_layers):
        fw = f"lstm{layer}.fw"
        bw = f"lstm{layer}.bw"
        y_fw, cache_fw = _scan_forward(
            h, params[f"{fw}.Wx"], params[f"{fw}.Wh"], params[f"{fw}.b"])
        rev = np.ascontiguousarray(h[:, ::-1])
        y_bw_r, cache_bw = _scan_forward(
            rev, params[f"{bw}.Wx"], params[f"{bw}.Wh"], params[f"{bw}.b"])
        h = np.concatenate([y_fw, y_bw_r[:, ::-1]], axis=2)
        caches.append((cache_fw, cache_bw))
    return h, caches


def backward(params, caches, dfeats, grads):
    hid = caches[-1][0][4].shape[2]
    dh = dfeats
    for layer in range(len(caches) - 1, -1, -1):
        cache_fw, cache_bw = caches[layer]
        fw = f"lstm{layer}.fw"
        bw = f"lstm{layer}.bw"
        dh_fw = np.ascontiguousarray(dh[:, :, :hid])
        dh_bw_r = np.ascontiguousarray(dh[:, ::-1, hid:])
        dx_fw, dwx, dwh, db = _scan_backward(
            cache_fw, params[f"{fw}.Wx"], params[f"{fw}.Wh"], dh_fw)
        grads[f"{fw}.Wx"] = dwx
        grads[f"{fw}.Wh"] = dwh
        grads[f"{fw}.b"] = db
        dx_bw_r, dwx, dwh, db = _scan_backward(
            cache_bw, params[f"{bw}.Wx"], params[f"{bw}.Wh"], dh_bw_r)
        grads[f"{bw}.Wx"] = dwx
        grads[f"{bw}.Wh"] = dwh
        grads[f"{bw}.b"] = db
        dh = dx_fw + dx_bw_r[:, ::-1]
    return dh
