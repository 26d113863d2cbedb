"""Epsilon-insensitive support vector regression trained by SMO.

The dual is solved in the usual 2n-variable form: for training point ``i``
the pair ``(a_i, a*_i)`` is stored as entries ``i`` and ``n + i`` of one
vector with labels ``+1`` and ``-1``. Working pairs are chosen by maximal
KKT violation and updated analytically with box clipping.
"""

from __future__ import annotations

import logging
import math
from collections import OrderedDict
from dataclasses import dataclass

import numpy as np

logger = logging.getLogger(__name__)

_TAU = 1e-12


@dataclass(frozen=True)
class SvrConfig:
    C: float = 1.0
    kernel: str = "rbf"
    gamma: float | str = "scale"
    epsilon: float = 0.1
    tol: float = 1e-3
    max_iter: int = 1_000_000
    cache_mb: float = 256.0

    def __post_init__(self) -> None:
        if not self.C > 0:
            raise ValueError("C must be > 0")
        if not self.epsilon >= 0:
            raise ValueError("epsilon must be >= 0")
        if self.kernel not in ("rbf", "linear"):
            raise ValueError(f"unsupported kernel {self.kernel!r}")
        if isinstance(self.gamma, str):
            if self.gamma != "scale":
                raise ValueError("gamma must be 'scale' or a positive number")
        elif not self.gamma > 0:
            raise ValueError("gamma must be > 0")
        if not self.tol > 0 or self.max_iter < 1:
            raise ValueError("tol must be > 0 and max_iter >= 1")


@dataclass(frozen=True)
class SvrModel:
    support_vectors: np.ndarray
    dual_coef: np.ndarray
    bias: float
    kernel: str
    gamma: float
    converged: bool = True
    iterations: int = 0

    def predict(self, X) -> np.ndarray:
        return predict_svr(self, X)

    def to_dict(self) -> dict:
        return {
            "support_vectors": self.support_vectors.tolist(),
            "dual_coef": self.dual_coef.tolist(),
            "bias": self.bias,
            "kernel": self.kernel,
            "gamma": self.gamma,
            "converged": self.converged,
            "iterations": self.iterations,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SvrModel":
        sv = np.asarray(d["support_vectors"], dtype=np.float64)
        return cls(
            sv.reshape(len(d["dual_coef"]), -1),
            np.asarray(d["dual_coef"], dtype=np.float64),
            float(d["bias"]),
            d["kernel"],
            float(d["gamma"]),
            bool(d.get("converged", True)),
            int(d.get("iterations", 0)),
        )


def gamma_scale(X) -> float:
    """``1 / (n_features * mean per-feature variance)`` of the training matrix."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.size == 0:
        raise ValueError("gamma_scale needs a non-empty 2-D matrix")
    var = float(X.var(axis=0).mean())
    if not var > 0:
        raise ValueError("all features have zero variance")
    return 1.0 / (X.shape[1] * var)


def rbf_kernel(x1, x2, gamma: float) -> float:
    diff = np.asarray(x1, dtype=np.float64) - np.asarray(x2, dtype=np.float64)
    return math.exp(-gamma * float(diff @ diff))


def kernel_matrix(A: np.ndarray, B: np.ndarray, kernel: str, gamma: float) -> np.ndarray:
    if kernel == "linear":
        return A @ B.T
    sq = (A * A).sum(axis=1)[:, None] + (B * B).sum(axis=1)[None, :] - 2.0 * (A @ B.T)
    np.maximum(sq, 0.0, out=sq)
    return np.exp(-gamma * sq)


class _KernelRows:
    """Kernel rows on demand, with an LRU cache bounded in megabytes."""

    def __init__(self, X: np.ndarray, kernel: str, gamma: float, cache_mb: float):
        self.X = X
        self.kernel = kernel
        self.gamma = gamma
        self.sq = (X * X).sum(axis=1)
        n = X.shape[0]
        self.capacity = max(2, int(cache_mb * 2**20 // (8 * n)))
        self.full = None
        if self.capacity >= n:
            self.full = kernel_matrix(X, X, kernel, gamma)
        self.cache: OrderedDict[int, np.ndarray] = OrderedDict()

    def diag(self) -> np.ndarray:
        if self.kernel == "linear":
            return self.sq.copy()
        return np.ones(self.X.shape[0])

    def row(self, i: int) -> np.ndarray:
        if self.full is not None:
            return self.full[i]
        hit = self.cache.get(i)
        if hit is not None:
            self.cache.move_to_end(i)
            return hit
        dots = self.X @ self.X[i]
        if self.kernel == "linear":
            out = dots
        else:
            out = np.exp(-self.gamma * np.maximum(self.sq + self.sq[i] - 2.0 * dots, 0.0))
        self.cache[i] = out
        if len(self.cache) > self.capacity:
            self.cache.popitem(last=False)
        return out


def dual_objective(alpha: np.ndarray, K: np.ndarray, z: np.ndarray, epsilon: float) -> float:
    """Dual objective (to be maximised) for the 2n-variable vector ``alpha``."""
    n = z.shape[0]
    beta = alpha[:n] - alpha[n:]
    return float(-0.5 * beta @ K @ beta - epsilon * alpha.sum() + z @ beta)


def fit_svr(X, y, cfg: SvrConfig = SvrConfig(), *, trace=None) -> SvrModel:
    """Train an epsilon-SVR.

    ``trace``, when given, is called after every pair update with the
    current 2n-vector of dual variables; tests use it to audit feasibility.
    A run that hits ``cfg.max_iter`` returns a usable model with
    ``converged=False``.
    """
    X = np.asarray(X, dtype=np.float64)
    z = np.asarray(y, dtype=np.float64).ravel()
    if X.ndim != 2 or X.shape[0] != z.shape[0]:
        raise ValueError("X must be 2-D with one row per target value")
    if X.shape[0] < 2:
        raise ValueError("SVR needs at least two samples")
    if not (np.isfinite(X).all() and np.isfinite(z).all()):
        raise ValueError("non-finite values in SVR input")
    n = X.shape[0]
    if cfg.kernel == "rbf":
        gamma = gamma_scale(X) if cfg.gamma == "scale" else float(cfg.gamma)
    else:
        gamma = 0.0
    C = float(cfg.C)
    rows = _KernelRows(X, cfg.kernel, gamma, cfg.cache_mb)
    kd = rows.diag()
    QD = np.concatenate([kd, kd])

    sign = np.concatenate([np.ones(n), -np.ones(n)])
    alpha = np.zeros(2 * n)
    # gradient of the minimisation form  0.5 a'Qa + p'a
    G = np.concatenate([cfg.epsilon - z, cfg.epsilon + z])

    def q_row(t: int) -> np.ndarray:
        k = rows.row(t % n)
        s = sign[t]
        return np.concatenate([s * k, -s * k])

    converged = False
    it = 0
    for it in range(1, cfg.max_iter + 1):
        score = -sign * G
        up = np.where(sign > 0, alpha < C, alpha > 0)
        low = np.where(sign > 0, alpha > 0, alpha < C)
        if not up.any() or not low.any():
            converged = True
            break
        up_scores = np.where(up, score, -np.inf)
        low_scores = np.where(low, score, np.inf)
        i = int(np.argmax(up_scores))
        j = int(np.argmin(low_scores))
        if up_scores[i] - low_scores[j] < cfg.tol:
            converged = True
            break

        Qi = q_row(i)
        Qj = q_row(j)
        ai, aj = alpha[i], alpha[j]
        if sign[i] != sign[j]:
            quad = QD[i] + QD[j] + 2.0 * Qi[j]
            delta = (-G[i] - G[j]) / max(quad, _TAU)
            diff = ai - aj
            ai += delta
            aj += delta
            if diff > 0:
                if aj < 0:
                    aj, ai = 0.0, diff
            elif ai < 0:
                ai, aj = 0.0, -diff
            if diff > 0:
                if ai > C:
                    ai, aj = C, C - diff
            elif aj > C:
                aj, ai = C, C + diff
        else:
            quad = QD[i] + QD[j] - 2.0 * Qi[j]
            delta = (G[i] - G[j]) / max(quad, _TAU)
            total = ai + aj
            ai -= delta
            aj += delta
            if total > C:
                if ai > C:
                    ai, aj = C, total - C
            elif aj < 0:
                aj, ai = 0.0, total
            if total > C:
                if aj > C:
                    aj, ai = C, total - C
            elif ai < 0:
                ai, aj = 0.0, total
        d_i = ai - alpha[i]
        d_j = aj - alpha[j]
        alpha[i], alpha[j] = ai, aj
        G += Qi * d_i + Qj * d_j
        if trace is not None:
            trace(alpha.copy())
    else:
        logger.warning("SVR stopped after %d iterations without reaching tol=%g", cfg.max_iter, cfg.tol)

    # bias from the free variables, or the midpoint of the feasible interval
    score = -sign * G
    free = (alpha > 0) & (alpha < C)
    if free.any():
        b = float(score[free].mean())
    else:
        up = np.where(sign > 0, alpha < C, alpha > 0)
        low = np.where(sign > 0, alpha > 0, alpha < C)
        hi = score[up].max() if up.any() else score[low].max()
        lo = score[low].min() if low.any() else score[up].min()
        b = float(0.5 * (hi + lo))

    beta = alpha[:n] - alpha[n:]
    keep = beta != 0.0
    return SvrModel(X[keep].copy(), beta[keep].copy(), b, cfg.kernel, gamma, converged, it)


def predict_svr(m: SvrModel, X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    if m.dual_coef.size == 0:
        return np.full(X.shape[0], m.bias)
    if X.shape[1] != m.support_vectors.shape[1]:
        raise ValueError("feature count does not match the support vectors")
    out = np.empty(X.shape[0])
    step = max(1, int(2**22 // max(1, m.support_vectors.shape[0])))
    for s in range(0, X.shape[0], step):
        K = kernel_matrix(X[s : s + step], m.support_vectors, m.kernel, m.gamma)
        out[s : s + step] = K @ m.dual_coef + m.bias
    return out
