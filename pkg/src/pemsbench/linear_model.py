"""Elastic-net linear regression fitted by cyclic coordinate descent."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ElasticNetConfig:
    alpha: float = 0.1
    l1_ratio: float = 0.1
    tol: float = 1e-6
    max_iter: int = 10_000

    def __post_init__(self) -> None:
        if not self.alpha >= 0:
            raise ValueError("alpha must be >= 0")
        if not 0.0 <= self.l1_ratio <= 1.0:
            raise ValueError("l1_ratio must lie in [0, 1]")
        if not self.tol > 0:
            raise ValueError("tol must be > 0")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")


@dataclass(frozen=True)
class LinearModel:
    weights: np.ndarray
    intercept: float
    converged: bool
    iterations: int
    config: ElasticNetConfig = field(default_factory=ElasticNetConfig)
    objective_history: tuple[float, ...] = ()

    def predict(self, X: np.ndarray) -> np.ndarray:
        return predict_linear(self, X)

    def to_dict(self) -> dict:
        return {
            "weights": self.weights.tolist(),
            "intercept": self.intercept,
            "converged": self.converged,
            "iterations": self.iterations,
            "config": {
                "alpha": self.config.alpha,
                "l1_ratio": self.config.l1_ratio,
                "tol": self.config.tol,
                "max_iter": self.config.max_iter,
            },
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LinearModel":
        return cls(
            np.asarray(d["weights"], dtype=np.float64),
            float(d["intercept"]),
            bool(d["converged"]),
            int(d["iterations"]),
            ElasticNetConfig(**d["config"]),
        )


def soft_threshold(z: float, gamma: float) -> float:
    if z > gamma:
        return z - gamma
    if z < -gamma:
        return z + gamma
    return 0.0


def elastic_net_objective(X, y, w, b, cfg: ElasticNetConfig) -> float:
    r = y - X @ w - b
    n = y.shape[0]
    return float(
        r @ r / (2 * n)
        + cfg.alpha * cfg.l1_ratio * np.abs(w).sum()
        + 0.5 * cfg.alpha * (1.0 - cfg.l1_ratio) * (w @ w)
    )


def fit_elastic_net(X, y, cfg: ElasticNetConfig = ElasticNetConfig()) -> LinearModel:
    """Minimise ``(1/2n)|y - Xw - b|^2 + a*r|w|_1 + (a/2)(1-r)|w|^2``.

    The intercept ``b`` is unpenalized and refreshed after every sweep over
    the coordinates. Iteration stops once the largest parameter change in a
    sweep drops below ``cfg.tol``.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).ravel()
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise ValueError("X must be 2-D with one row per target value")
    n, d = X.shape
    if n < 2:
        raise ValueError("elastic net needs at least two samples")
    if not (np.isfinite(X).all() and np.isfinite(y).all()):
        raise ValueError("non-finite values in elastic net input")
    col_mean = X.mean(axis=0)
    col_std = X.std(axis=0)
    if d and (np.abs(col_mean).max() > 1e-6 or np.abs(col_std[col_std > 0] - 1).max(initial=0) > 1e-6):
        logger.debug("elastic net input is not standardized; penalty is scale dependent")

    l1 = cfg.alpha * cfg.l1_ratio
    l2 = cfg.alpha * (1.0 - cfg.l1_ratio)
    col_sq = (X * X).sum(axis=0) / n

    w = np.zeros(d)
    b = float(y.mean())
    r = y - b
    history = [elastic_net_objective(X, y, w, b, cfg)]
    converged = False
    it = 0
    for it in range(1, cfg.max_iter + 1):
        max_delta = 0.0
        for j in range(d):
            denom = col_sq[j] + l2
            if denom <= 0.0:
                continue
            xj = X[:, j]
            old = w[j]
            rho = xj @ r / n + col_sq[j] * old
            new = soft_threshold(rho, l1) / denom
            if new != old:
                r -= xj * (new - old)
                w[j] = new
                max_delta = max(max_delta, abs(new - old))
        shift = float(r.mean())
        if shift != 0.0:
            b += shift
            r -= shift
            max_delta = max(max_delta, abs(shift))
        history.append(elastic_net_objective(X, y, w, b, cfg))
        if max_delta < cfg.tol:
            converged = True
            break
    if not converged:
        logger.warning("elastic net did not converge in %d sweeps", cfg.max_iter)
    return LinearModel(w, b, converged, it, cfg, tuple(history))


def predict_linear(m: LinearModel, X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    if X.shape[1] != m.weights.shape[0]:
        raise ValueError(f"model has {m.weights.shape[0]} weights, input has {X.shape[1]} features")
    return X @ m.weights + m.intercept
