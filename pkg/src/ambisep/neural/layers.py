"""Batched LSTM with backpropagation through time, in plain numpy.

Shapes: inputs ``(B, T, D)``, hidden ``H``. Gate order inside the stacked
weight matrices is ``[input, forget, output, candidate]``.
"""
import numpy as np


def sigmoid(z):
    # split by sign so large |z| neither overflows nor loses precision
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def lstm_forward(x, W, U, b, reverse=False):
    """Run one LSTM direction. Returns hidden states ``(B, T, H)`` and a cache."""
    if reverse:
        x = x[:, ::-1]
    B, T, _ = x.shape
    H = U.shape[0]
    xw = x @ W + b
    h = np.zeros((B, H), dtype=x.dtype)
    c = np.zeros((B, H), dtype=x.dtype)
    hs = np.empty((B, T, H), dtype=x.dtype)
    cs = np.empty((B, T, H), dtype=x.dtype)
    acts = np.empty((B, T, 4 * H), dtype=x.dtype)
    for t in range(T):
        z = xw[:, t] + h @ U
        a = acts[:, t]
        a[:, :3 * H] = sigmoid(z[:, :3 * H])
        a[:, 3 * H:] = np.tanh(z[:, 3 * H:])
        c = a[:, H:2 * H] * c + a[:, :H] * a[:, 3 * H:]
        h = a[:, 2 * H:3 * H] * np.tanh(c)
        cs[:, t] = c
        hs[:, t] = h
    cache = (x, W, U, hs, cs, acts, reverse)
    return (hs[:, ::-1] if reverse else hs), cache


def lstm_backward(dh_out, cache):
    """Gradients w.r.t. input, W, U and b given ``dL/dh`` for every step."""
    x, W, U, hs, cs, acts, reverse = cache
    if reverse:
        dh_out = dh_out[:, ::-1]
    B, T, H = hs.shape
    dz_all = np.empty((B, T, 4 * H), dtype=hs.dtype)
    dh_next = np.zeros((B, H), dtype=hs.dtype)
    dc_next = np.zeros((B, H), dtype=hs.dtype)
    UT = U.T
    for t in range(T - 1, -1, -1):
        a = acts[:, t]
        i, f, o, g = a[:, :H], a[:, H:2 * H], a[:, 2 * H:3 * H], a[:, 3 * H:]
        tc = np.tanh(cs[:, t])
        c_prev = cs[:, t - 1] if t > 0 else 0.0
        dh = dh_out[:, t] + dh_next
        dc = dh * o * (1.0 - tc * tc) + dc_next
        dz = dz_all[:, t]
        dz[:, :H] = dc * g * i * (1.0 - i)
        dz[:, H:2 * H] = dc * c_prev * f * (1.0 - f)
        dz[:, 2 * H:3 * H] = dh * tc * o * (1.0 - o)
        dz[:, 3 * H:] = dc * i * (1.0 - g * g)
        dc_next = dc * f
        dh_next = dz @ UT
    h_prev = np.concatenate([np.zeros((B, 1, H), dtype=hs.dtype), hs[:, :-1]], axis=1)
    dW = np.einsum("btd,btk->dk", x, dz_all)
    dU = np.einsum("bth,btk->hk", h_prev, dz_all)
    db = dz_all.sum(axis=(0, 1))
    dx = dz_all @ W.T
    return (dx[:, ::-1] if reverse else dx), dW, dU, db
