"""Regression error metrics and the normalized-report convention."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

MAPE_FLOOR = 1e-8

CSV_HEADER = ("model", "target", "mse", "rmse", "mae", "mape", "n", "n_excluded")


def _pair(pred, actual) -> tuple[np.ndarray, np.ndarray]:
    p = np.asarray(pred, dtype=np.float64).ravel()
    a = np.asarray(actual, dtype=np.float64).ravel()
    if p.shape != a.shape:
        raise ValueError(f"length mismatch: {p.shape[0]} predictions vs {a.shape[0]} actuals")
    if p.size == 0:
        raise ValueError("empty input")
    if not (np.isfinite(p).all() and np.isfinite(a).all()):
        raise ValueError("non-finite values in metric input")
    return p, a


def mse(pred, actual) -> float:
    p, a = _pair(pred, actual)
    return float(np.mean((p - a) ** 2))


def rmse(pred, actual) -> float:
    return math.sqrt(mse(pred, actual))


def mae(pred, actual) -> float:
    p, a = _pair(pred, actual)
    return float(np.mean(np.abs(p - a)))


def mape(pred, actual) -> tuple[float, int]:
    """Mean absolute percentage error and the number of samples excluded.

    Samples with ``|actual| < 1e-8`` are left out of the average.
    """
    p, a = _pair(pred, actual)
    keep = np.abs(a) >= MAPE_FLOOR
    n_excluded = int(p.size - keep.sum())
    if not keep.any():
        raise ValueError("every sample has a near-zero actual value; MAPE undefined")
    return float(np.mean(np.abs((p[keep] - a[keep]) / a[keep])) * 100.0), n_excluded


@dataclass(frozen=True)
class MetricReport:
    mse: float
    rmse: float
    mae: float
    mape: float
    n_evaluated: int
    n_excluded_mape: int

    def as_dict(self) -> dict:
        return asdict(self)

    def csv_row(self, model: str, target: str) -> list[str]:
        """One CSV row in ``CSV_HEADER`` order, reals at 5 significant digits."""
        return [
            model,
            target,
            f"{self.mse:.5g}",
            f"{self.rmse:.5g}",
            f"{self.mae:.5g}",
            f"{self.mape:.5g}",
            str(self.n_evaluated),
            str(self.n_excluded_mape),
        ]


def evaluate(pred, actual) -> MetricReport:
    p, a = _pair(pred, actual)
    m = mse(p, a)
    pct, excluded = mape(p, a)
    return MetricReport(m, math.sqrt(m), mae(p, a), pct, int(p.size), excluded)


@dataclass(frozen=True)
class TargetNormalizer:
    """Min-max scaling of targets with training-split extremes."""

    y_min: float
    y_max: float

    def __post_init__(self) -> None:
        if not self.y_max > self.y_min:
            raise ValueError(f"degenerate target range [{self.y_min}, {self.y_max}]")

    @classmethod
    def fit(cls, y_train) -> "TargetNormalizer":
        y = np.asarray(y_train, dtype=np.float64)
        return cls(float(y.min()), float(y.max()))

    def to_dict(self) -> dict:
        return {"y_min": self.y_min, "y_max": self.y_max}


def normalize_targets(norm: TargetNormalizer, y) -> np.ndarray:
    return (np.asarray(y, dtype=np.float64) - norm.y_min) / (norm.y_max - norm.y_min)


def evaluate_normalized(norm: TargetNormalizer, pred, actual) -> MetricReport:
    return evaluate(normalize_targets(norm, pred), normalize_targets(norm, actual))
