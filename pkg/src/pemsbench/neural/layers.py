"""Dense, LSTM and GRU layers with hand-written backward passes.

Every layer is a pair of pure functions. ``*_forward`` returns the output
and a cache; ``*_backward`` consumes the upstream gradient and that cache
and returns the input gradient plus a dict of parameter gradients keyed
like the parameter dict.

Recurrent layers take batches shaped ``(N, T, D)``. Gate blocks are packed
along the last axis: LSTM uses ``[input | forget | output | candidate]``,
GRU uses ``[update | reset | candidate]``.
"""

from __future__ import annotations

import numpy as np

ACTIVATIONS = ("relu", "linear", "tanh", "sigmoid")


def sigmoid(x: np.ndarray) -> np.ndarray:
    # tanh form never overflows
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def activate(z: np.ndarray, activation: str) -> np.ndarray:
    if activation == "relu":
        return np.maximum(z, 0.0)
    if activation == "linear":
        return z
    if activation == "tanh":
        return np.tanh(z)
    if activation == "sigmoid":
        return sigmoid(z)
    raise ValueError(f"unknown activation {activation!r}")


def activation_grad(z: np.ndarray, y: np.ndarray, activation: str) -> np.ndarray:
    """Derivative of the activation at pre-activation ``z`` (with output ``y``)."""
    if activation == "relu":
        return (z > 0).astype(z.dtype)
    if activation == "linear":
        return np.ones_like(z)
    if activation == "tanh":
        return 1.0 - y * y
    if activation == "sigmoid":
        return y * (1.0 - y)
    raise ValueError(f"unknown activation {activation!r}")


# ---------------------------------------------------------------------------
# dense


def dense_forward(W: np.ndarray, b: np.ndarray, x: np.ndarray, activation: str = "linear"):
    """``y = act(x @ W + b)`` for a batch ``x`` of shape ``(N, in)``."""
    if x.shape[-1] != W.shape[0] or b.shape != (W.shape[1],):
        raise ValueError(f"shape mismatch: x {x.shape}, W {W.shape}, b {b.shape}")
    z = x @ W + b
    y = activate(z, activation)
    return y, (x, z, y, activation)


def dense_backward(dy: np.ndarray, cache, W: np.ndarray):
    """Gradients ``(dx, {"W": dW, "b": db})`` of a dense layer."""
    x, z, y, activation = cache
    dz = dy if activation == "linear" else dy * activation_grad(z, y, activation)
    return dz @ W.T, {"W": x.T @ dz, "b": dz.sum(axis=0)}


# ---------------------------------------------------------------------------
# LSTM


def lstm_cell(x_t, h_prev, c_prev, params):
    """One LSTM step; returns ``(h_t, c_t)``."""
    H = h_prev.shape[-1]
    a = x_t @ params["Wx"] + h_prev @ params["Wh"] + params["b"]
    i = sigmoid(a[..., :H])
    f = sigmoid(a[..., H : 2 * H])
    o = sigmoid(a[..., 2 * H : 3 * H])
    g = np.tanh(a[..., 3 * H :])
    c = f * c_prev + i * g
    return o * np.tanh(c), c


def _sigmoid_(a: np.ndarray) -> np.ndarray:
    """In-place sigmoid."""
    a *= 0.5
    np.tanh(a, out=a)
    a += 1.0
    a *= 0.5
    return a


def lstm_forward(x: np.ndarray, params: dict, return_sequences: bool = False):
    N, T, D = x.shape
    Wx, Wh, b = params["Wx"], params["Wh"], params["b"]
    H = Wh.shape[0]
    if Wx.shape != (D, 4 * H) or Wh.shape != (H, 4 * H) or b.shape != (4 * H,):
        raise ValueError(f"LSTM shape mismatch: x {x.shape}, Wx {Wx.shape}, Wh {Wh.shape}")
    # time-major buffers keep every per-step slice contiguous
    xt = np.ascontiguousarray(x.transpose(1, 0, 2))
    gates = (xt.reshape(T * N, D) @ Wx).reshape(T, N, 4 * H)
    gates += b
    hs = np.zeros((T + 1, N, H), dtype=x.dtype)
    cs = np.zeros((T + 1, N, H), dtype=x.dtype)
    tcs = np.empty((T, N, H), dtype=x.dtype)
    tmp = np.empty((N, H), dtype=x.dtype)
    for t in range(T):
        a = gates[t]
        a += hs[t] @ Wh
        _sigmoid_(a[:, : 3 * H])
        np.tanh(a[:, 3 * H :], out=a[:, 3 * H :])
        c = cs[t + 1]
        np.multiply(a[:, H : 2 * H], cs[t], out=c)
        np.multiply(a[:, :H], a[:, 3 * H :], out=tmp)
        c += tmp
        np.tanh(c, out=tcs[t])
        np.multiply(a[:, 2 * H : 3 * H], tcs[t], out=hs[t + 1])
    out = hs[1:].transpose(1, 0, 2) if return_sequences else hs[-1]
    return out, (xt, hs, cs, gates, tcs, return_sequences)


def lstm_backward(dout: np.ndarray, cache, params: dict):
    xt, hs, cs, gates, tcs, return_sequences = cache
    T, N, D = xt.shape
    Wx, Wh = params["Wx"], params["Wh"]
    H = Wh.shape[0]
    dh_seq = np.ascontiguousarray(dout.transpose(1, 0, 2)) if return_sequences else None
    da = np.empty((T, N, 4 * H), dtype=xt.dtype)
    dh = np.empty((N, H), dtype=xt.dtype)
    dc = np.zeros((N, H), dtype=xt.dtype)
    tmp = np.empty((N, H), dtype=xt.dtype)
    dh_next = None
    WhT = np.ascontiguousarray(Wh.T)
    for t in range(T - 1, -1, -1):
        a = gates[t]
        i, f, o, g = a[:, :H], a[:, H : 2 * H], a[:, 2 * H : 3 * H], a[:, 3 * H :]
        tc = tcs[t]
        if dh_seq is not None:
            dh[...] = dh_seq[t]
            if dh_next is not None:
                dh += dh_next
        elif dh_next is None:
            dh[...] = dout
        else:
            dh[...] = dh_next
        # dc += dh * o * (1 - tc^2)
        np.multiply(tc, tc, out=tmp)
        np.subtract(1.0, tmp, out=tmp)
        tmp *= o
        tmp *= dh
        dc += tmp
        d = da[t]
        # input gate
        np.multiply(dc, g, out=d[:, :H])
        d[:, :H] *= i
        np.subtract(1.0, i, out=tmp)
        d[:, :H] *= tmp
        # forget gate
        np.multiply(dc, cs[t], out=d[:, H : 2 * H])
        d[:, H : 2 * H] *= f
        np.subtract(1.0, f, out=tmp)
        d[:, H : 2 * H] *= tmp
        # output gate
        np.multiply(dh, tc, out=d[:, 2 * H : 3 * H])
        d[:, 2 * H : 3 * H] *= o
        np.subtract(1.0, o, out=tmp)
        d[:, 2 * H : 3 * H] *= tmp
        # candidate
        np.multiply(g, g, out=tmp)
        np.subtract(1.0, tmp, out=tmp)
        tmp *= i
        np.multiply(dc, tmp, out=d[:, 3 * H :])
        dc *= f
        dh_next = d @ WhT
    flat = da.reshape(T * N, 4 * H)
    grads = {
        "Wx": xt.reshape(T * N, D).T @ flat,
        "Wh": hs[:-1].reshape(T * N, H).T @ flat,
        "b": flat.sum(axis=0),
    }
    dx = (flat @ Wx.T).reshape(T, N, D).transpose(1, 0, 2)
    return dx, grads


# ---------------------------------------------------------------------------
# GRU


def gru_cell(x_t, h_prev, params):
    """One GRU step; ``h_t = (1 - z) * h_prev + z * candidate``."""
    H = h_prev.shape[-1]
    Wx, Wh, b = params["Wx"], params["Wh"], params["b"]
    xw = x_t @ Wx + b
    zr = sigmoid(xw[..., : 2 * H] + h_prev @ Wh[:, : 2 * H])
    z, r = zr[..., :H], zr[..., H:]
    n = np.tanh(xw[..., 2 * H :] + (r * h_prev) @ Wh[:, 2 * H :])
    return (1.0 - z) * h_prev + z * n


def gru_forward(x: np.ndarray, params: dict, return_sequences: bool = False):
    N, T, D = x.shape
    Wx, Wh, b = params["Wx"], params["Wh"], params["b"]
    H = Wh.shape[0]
    if Wx.shape != (D, 3 * H) or Wh.shape != (H, 3 * H) or b.shape != (3 * H,):
        raise ValueError(f"GRU shape mismatch: x {x.shape}, Wx {Wx.shape}, Wh {Wh.shape}")
    xt = np.ascontiguousarray(x.transpose(1, 0, 2))
    gates = (xt.reshape(T * N, D) @ Wx).reshape(T, N, 3 * H)
    gates += b
    Wzr, Wn = Wh[:, : 2 * H], Wh[:, 2 * H :]
    hs = np.zeros((T + 1, N, H), dtype=x.dtype)
    rh = np.empty((T, N, H), dtype=x.dtype)
    for t in range(T):
        h = hs[t]
        a = gates[t]
        a[:, : 2 * H] += h @ Wzr
        _sigmoid_(a[:, : 2 * H])
        z, r, n = a[:, :H], a[:, H : 2 * H], a[:, 2 * H :]
        np.multiply(r, h, out=rh[t])
        n += rh[t] @ Wn
        np.tanh(n, out=n)
        hn = hs[t + 1]
        np.subtract(n, h, out=hn)
        hn *= z
        hn += h
    out = hs[1:].transpose(1, 0, 2) if return_sequences else hs[-1]
    return out, (xt, hs, gates, rh, return_sequences)


def gru_backward(dout: np.ndarray, cache, params: dict):
    xt, hs, gates, rh, return_sequences = cache
    T, N, D = xt.shape
    Wx, Wh = params["Wx"], params["Wh"]
    H = Wh.shape[0]
    WzrT = np.ascontiguousarray(Wh[:, : 2 * H].T)
    WnT = np.ascontiguousarray(Wh[:, 2 * H :].T)
    dh_seq = np.ascontiguousarray(dout.transpose(1, 0, 2)) if return_sequences else None
    da = np.empty((T, N, 3 * H), dtype=xt.dtype)
    dh = np.empty((N, H), dtype=xt.dtype)
    tmp = np.empty((N, H), dtype=xt.dtype)
    dh_next = None
    for t in range(T - 1, -1, -1):
        h = hs[t]
        a = gates[t]
        z, r, n = a[:, :H], a[:, H : 2 * H], a[:, 2 * H :]
        if dh_seq is not None:
            dh[...] = dh_seq[t]
            if dh_next is not None:
                dh += dh_next
        elif dh_next is None:
            dh[...] = dout
        else:
            dh[...] = dh_next
        d = da[t]
        dz, dr, dn = d[:, :H], d[:, H : 2 * H], d[:, 2 * H :]
        # candidate pre-activation: dh * z * (1 - n^2)
        np.multiply(n, n, out=tmp)
        np.subtract(1.0, tmp, out=tmp)
        tmp *= z
        np.multiply(dh, tmp, out=dn)
        drh = dn @ WnT
        # update gate: dh * (n - h) * z * (1 - z)
        np.subtract(n, h, out=dz)
        dz *= dh
        dz *= z
        np.subtract(1.0, z, out=tmp)
        dz *= tmp
        # reset gate: drh * h * r * (1 - r)
        np.multiply(drh, h, out=dr)
        dr *= r
        np.subtract(1.0, r, out=tmp)
        dr *= tmp
        # carry to h_{t-1}
        np.subtract(1.0, z, out=tmp)
        dh_next = dh * tmp
        drh *= r
        dh_next += drh
        dh_next += d[:, : 2 * H] @ WzrT
    flat = da.reshape(T * N, 3 * H)
    dWh = np.empty_like(Wh)
    dWh[:, : 2 * H] = hs[:-1].reshape(T * N, H).T @ flat[:, : 2 * H]
    dWh[:, 2 * H :] = rh.reshape(T * N, H).T @ flat[:, 2 * H :]
    grads = {
        "Wx": xt.reshape(T * N, D).T @ flat,
        "Wh": dWh,
        "b": flat.sum(axis=0),
    }
    dx = (flat @ Wx.T).reshape(T, N, D).transpose(1, 0, 2)
    return dx, grads
