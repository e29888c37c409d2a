"""Projected LSTM cell and time-unrolled layer with manual
backpropagation through time.

The cell computes gates [i|f|g|o] from input and recurrent state,
advances the cell state, then linearly projects the hidden vector and
clips it elementwise; the clipped projection is both the layer output
and the recurrent state. Saturated clip components pass zero gradient.
Padded positions (mask 0) carry state through unchanged in both passes.
"""

import numpy as np

from . import kernels


def lstm_cell_forward(x, h_prev, c_prev, layer, clip_lo, clip_hi):
    """One batched step. Returns (h, c, cache) with h already projected
    and clipped."""
    if x.shape[1] != layer.Wx.shape[0]:
        raise ValueError(f"input dim {x.shape[1]} != weight fan-in {layer.Wx.shape[0]}")
    a = x @ layer.Wx + h_prev @ layer.Wh + layer.b
    act, c, tanh_c, hc = kernels.lstm_gates_forward(a, c_prev)
    p = hc @ layer.Wp
    h = np.clip(p, clip_lo, clip_hi)
    return h, c, (x, h_prev, c_prev, act, tanh_c, hc, p)


def lstm_cell_backward(dh, dc, cache, layer, clip_lo, clip_hi):
    """Backward of one step. Returns (dx, dh_prev, dc_prev, grads)."""
    x, h_prev, c_prev, act, tanh_c, hc, p = cache
    dp = dh * ((p > clip_lo) & (p < clip_hi))
    dhc = dp @ layer.Wp.T
    da, dc_prev = kernels.lstm_gates_backward(dhc, dc, act, c_prev, tanh_c)
    grads = {
        "Wx": x.T @ da,
        "Wh": h_prev.T @ da,
        "b": da.sum(axis=0),
        "Wp": hc.T @ dp,
    }
    return da @ layer.Wx.T, da @ layer.Wh.T, dc_prev, grads


def lstm_layer_forward(inputs, mask, layer, clip_lo, clip_hi, reverse=False):
    """Run a layer over (T, B, Din) inputs with (T, B) mask.

    Returns (out, cache); out[t] is the carried state, so padded
    positions repeat the last real state (they are excluded from the
    loss by the same mask).
    """
    T, B, _ = inputs.shape
    H = layer.Wp.shape[0]
    P = layer.Wp.shape[1]
    dt = inputs.dtype
    pre = inputs @ layer.Wx + layer.b

    act = np.empty((T, B, 4 * H), dtype=dt)
    cprev = np.empty((T, B, H), dtype=dt)
    tanh_c = np.empty((T, B, H), dtype=dt)
    hc = np.empty((T, B, H), dtype=dt)
    proj = np.empty((T, B, P), dtype=dt)
    hprev = np.empty((T, B, P), dtype=dt)
    out = np.empty((T, B, P), dtype=dt)

    h = np.zeros((B, P), dtype=dt)
    c = np.zeros((B, H), dtype=dt)
    order = range(T - 1, -1, -1) if reverse else range(T)
    for t in order:
        hprev[t] = h
        cprev[t] = c
        a = pre[t] + h @ layer.Wh
        act[t], c_new, tanh_c[t], hc[t] = kernels.lstm_gates_forward(a, c)
        proj[t] = hc[t] @ layer.Wp
        h_new = np.clip(proj[t], clip_lo, clip_hi)
        m = mask[t][:, None]
        h = m * h_new + (1.0 - m) * h
        c = m * c_new + (1.0 - m) * c
        out[t] = h

    cache = {
        "inputs": inputs,
        "mask": mask,
        "act": act,
        "cprev": cprev,
        "tanh_c": tanh_c,
        "hc": hc,
        "proj": proj,
        "hprev": hprev,
        "reverse": reverse,
    }
    return out, cache


def lstm_layer_backward(dout, cache, layer, clip_lo, clip_hi):
    """BPTT through one layer. Returns (dinputs, grads dict)."""
    inputs = cache["inputs"]
    mask = cache["mask"]
    T, B, Din = inputs.shape
    H = layer.Wp.shape[0]
    dt = inputs.dtype

    da_all = np.zeros((T, B, 4 * H), dtype=dt)
    dp_all = np.zeros_like(cache["proj"])
    dh = np.zeros((B, layer.Wp.shape[1]), dtype=dt)
    dc = np.zeros((B, H), dtype=dt)

    order = range(T - 1, -1, -1) if cache["reverse"] else range(T)
    for t in reversed(order):
        m = mask[t][:, None]
        dh_total = dh + dout[t]
        dh_new = m * dh_total
        carry_h = (1.0 - m) * dh_total
        dc_new = m * dc
        carry_c = (1.0 - m) * dc

        p = cache["proj"][t]
        dp = dh_new * ((p > clip_lo) & (p < clip_hi))
        dp_all[t] = dp
        dhc = dp @ layer.Wp.T
        da, dc_prev = kernels.lstm_gates_backward(dhc, dc_new, cache["act"][t], cache["cprev"][t], cache["tanh_c"][t])
        da_all[t] = da
        dh = da @ layer.Wh.T + carry_h
        dc = dc_prev + carry_c

    flat_in = inputs.reshape(T * B, Din)
    flat_da = da_all.reshape(T * B, 4 * H)
    grads = {
        "Wx": flat_in.T @ flat_da,
        "Wh": cache["hprev"].reshape(T * B, -1).T @ flat_da,
        "b": flat_da.sum(axis=0),
        "Wp": cache["hc"].reshape(T * B, H).T @ dp_all.reshape(T * B, -1),
    }
    dinputs = (flat_da @ layer.Wx.T).reshape(T, B, Din)
    return dinputs, grads
