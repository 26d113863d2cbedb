"""Central finite-difference gradient checks shared by the test modules."""

import numpy as np

from pemsbench.neural import layers as L
from pemsbench.neural import network as net

H_STEP = 1e-6


def rel_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """Norm-wise relative error; robust to individually tiny entries."""
    num = np.linalg.norm(analytic - numeric)
    den = max(np.linalg.norm(analytic) + np.linalg.norm(numeric), 1e-12)
    return float(num / den)


def numeric_grad(f, a: np.ndarray, h: float = H_STEP) -> np.ndarray:
    """d f() / d a by central differences, perturbing ``a`` in place."""
    g = np.zeros_like(a)
    it = np.nditer(a, flags=["multi_index"])
    for _ in it:
        i = it.multi_index
        old = a[i]
        a[i] = old + h
        fp = f()
        a[i] = old - h
        fm = f()
        a[i] = old
        g[i] = (fp - fm) / (2 * h)
    return g


def _random_params(rng, shapes):
    return {k: rng.normal(scale=0.5, size=s) for k, s in shapes.items()}


def check_dense(seed: int, activation: str) -> float:
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(5, 4))
    W, b = rng.normal(size=(4, 3)), rng.normal(size=3)
    R = rng.normal(size=(5, 3))

    def loss():
        return float((L.dense_forward(W, b, x, activation)[0] * R).sum())

    _, cache = L.dense_forward(W, b, x, activation)
    dx, grads = L.dense_backward(R, cache, W)
    return max(
        rel_error(dx, numeric_grad(loss, x)),
        rel_error(grads["W"], numeric_grad(loss, W)),
        rel_error(grads["b"], numeric_grad(loss, b)),
    )


def check_recurrent(seed: int, kind: str, T: int, return_sequences: bool) -> float:
    rng = np.random.default_rng(seed)
    N, D, H = 3, 4, 5
    G = 4 * H if kind == "lstm" else 3 * H
    p = _random_params(rng, {"Wx": (D, G), "Wh": (H, G), "b": (G,)})
    x = rng.normal(size=(N, T, D))
    fwd, bwd = (L.lstm_forward, L.lstm_backward) if kind == "lstm" else (L.gru_forward, L.gru_backward)
    out, cache = fwd(x, p, return_sequences)
    R = rng.normal(size=out.shape)

    def loss():
        return float((fwd(x, p, return_sequences)[0] * R).sum())

    dx, grads = bwd(R, cache, p)
    errs = [rel_error(dx, numeric_grad(loss, x))]
    errs += [rel_error(grads[k], numeric_grad(loss, p[k])) for k in ("Wx", "Wh", "b")]
    return max(errs)


def check_stacked(seed: int, kind: str, T: int = 8) -> float:
    """Whole network: two stacked recurrent layers, dense head, scalar output."""
    rng = np.random.default_rng(seed)
    spec = net.recurrent_spec(kind, 3, seed, recurrent=(4, 3), dense=(5,))
    params = net.init_params(spec)
    for layer in params:  # non-zero biases exercise every gradient path
        layer["b"] += rng.normal(scale=0.3, size=layer["b"].shape)
    x = rng.normal(size=(2, T, 3))
    R = rng.normal(size=2)

    def loss():
        return float((net.forward(spec, params, x)[0] * R).sum())

    out, caches = net.forward(spec, params, x)
    grads = net.backward(spec, params, caches, R)
    return max(rel_error(g[k], numeric_grad(loss, p[k])) for p, g in zip(params, grads) for k in p)
