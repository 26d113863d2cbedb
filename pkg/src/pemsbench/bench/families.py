"""Uniform fit/predict adapters for the eight model families.

Each family declares which view of the data it consumes:

* ``standardized`` - per-row features scaled with training statistics
* ``raw`` - per-row features as recorded (tree models)
* ``windows`` - standardized features cut into overlapping sequences

SVR and the neural nets are trained on a standardized copy of the target;
their predictions are mapped back to target units.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Callable

import numpy as np

from .. import linear_model, neighbors, svr, trees
from ..neural import network

FAMILIES = ("linear", "svr", "cart", "gbt", "knn", "mlp", "lstm", "gru")

DISPLAY_NAMES = {
    "linear": "Linear Regression",
    "svr": "SVM",
    "cart": "Decision Trees",
    "gbt": "XGBoost",
    "knn": "KNN",
    "mlp": "MLP",
    "lstm": "LSTM",
    "gru": "GRU",
}

INPUT_KIND = {
    "linear": "standardized",
    "svr": "standardized",
    "knn": "standardized",
    "mlp": "standardized",
    "cart": "raw",
    "gbt": "raw",
    "lstm": "windows",
    "gru": "windows",
}

TREE_FAMILIES = ("cart", "gbt")

# Hyperparameters reported for the final models, per target.
PAPER_BUNDLES: dict[str, dict[str, dict[str, Any]]] = {
    "linear": {
        "NOx": {"alpha": 0.1, "l1_ratio": 0.1},
        "CO": {"alpha": 0.1, "l1_ratio": 0.1},
    },
    "svr": {
        "NOx": {"C": 10.0, "gamma": "scale", "kernel": "rbf"},
        "CO": {"C": 100.0, "gamma": "scale", "kernel": "rbf"},
    },
    "cart": {
        "NOx": {"max_depth": None, "min_samples_leaf": 4, "min_samples_split": 2, "max_features": "sqrt"},
        "CO": {"max_depth": 30, "min_samples_leaf": 1, "min_samples_split": 5, "max_features": "sqrt"},
    },
    "gbt": {
        "NOx": {"max_depth": 8, "learning_rate": 0.1, "n_estimators": 300},
        "CO": {"max_depth": 8, "learning_rate": 0.01, "n_estimators": 300},
    },
    "knn": {
        "NOx": {"n_neighbors": 4, "weights": "distance", "algorithm": "brute"},
        "CO": {"n_neighbors": 4, "weights": "distance", "algorithm": "ball_tree"},
    },
    "mlp": {
        "NOx": {"num_epochs": 100, "learning_rate": 0.01, "batch_size": 64},
        "CO": {"num_epochs": 100, "learning_rate": 0.01, "batch_size": 64},
    },
    "lstm": {
        "NOx": {"num_epochs": 100, "learning_rate": 0.001, "batch_size": 64},
        "CO": {"num_epochs": 100, "learning_rate": 0.001, "batch_size": 64},
    },
    "gru": {
        "NOx": {"num_epochs": 100, "learning_rate": 0.001, "batch_size": 64},
        "CO": {"num_epochs": 100, "learning_rate": 0.001, "batch_size": 64},
    },
}


def paper_bundle(family: str, target: str) -> dict[str, Any]:
    return dict(PAPER_BUNDLES[family][target])


def default_grid(family: str, target: str) -> list[dict[str, Any]]:
    """The reported bundle first, then a small neighbourhood around it."""
    p = paper_bundle(family, target)
    if family == "linear":
        extra = [{**p, "alpha": 0.01}, {**p, "alpha": 1.0}, {**p, "l1_ratio": 0.5}]
    elif family == "svr":
        extra = [{**p, "C": p["C"] / 10}, {**p, "kernel": "linear"}]
    elif family == "cart":
        extra = [{**p, "max_features": None}, {**p, "max_depth": 12}]
    elif family == "gbt":
        extra = [{**p, "max_depth": 6}]
    elif family == "knn":
        extra = [{**p, "n_neighbors": 2}, {**p, "n_neighbors": 8}]
    else:
        extra = [{**p, "learning_rate": p["learning_rate"] / 2}]
    return [p, *extra]


@dataclass
class FittedModel:
    """A trained model from any family, with optional target standardization."""

    family: str
    params: dict[str, Any]
    model: Any
    y_mean: float = 0.0
    y_scale: float = 1.0

    def predict(self, X: np.ndarray) -> np.ndarray:
        return PREDICTORS[self.family](self.model, X) * self.y_scale + self.y_mean


def _target_scaling(y: np.ndarray) -> tuple[float, float]:
    std = float(y.std())
    return float(y.mean()), std if std > 0 else 1.0


def _fit_linear(X, y, params, seed):
    return linear_model.fit_elastic_net(X, y, linear_model.ElasticNetConfig(**params))


def _fit_svr(X, y, params, seed):
    return svr.fit_svr(X, y, svr.SvrConfig(**params))


def _fit_cart(X, y, params, seed):
    return trees.fit_cart(X, y, trees.TreeConfig(seed=seed, **params))


def _fit_gbt(X, y, params, seed):
    return trees.fit_gbt(X, y, trees.GbtConfig(**params))


def _fit_knn(X, y, params, seed):
    return neighbors.fit_knn(X, y, neighbors.KnnConfig(**params))


def _net_fitter(kind: str) -> Callable:
    def fit(X, y, params, seed):
        params = dict(params)
        arch = params.pop("architecture", None)
        dtype = params.pop("dtype", "float32" if kind != "mlp" else "float64")
        if kind == "mlp":
            spec = network.mlp_spec(X.shape[-1], seed, **(arch or {}))
        else:
            spec = network.recurrent_spec(kind, X.shape[-1], seed, **(arch or {}))
        cfg = network.TrainConfig(seed=seed, dtype=dtype, **params)
        return network.train_net(spec, X, y, cfg)

    return fit


FITTERS: dict[str, Callable] = {
    "linear": _fit_linear,
    "svr": _fit_svr,
    "cart": _fit_cart,
    "gbt": _fit_gbt,
    "knn": _fit_knn,
    "mlp": _net_fitter("mlp"),
    "lstm": _net_fitter("lstm"),
    "gru": _net_fitter("gru"),
}

PREDICTORS: dict[str, Callable] = {
    "linear": linear_model.predict_linear,
    "svr": svr.predict_svr,
    "cart": trees.predict_tree,
    "gbt": trees.predict_gbt,
    "knn": lambda m, X: m.predict(X),
    "mlp": network.predict_net,
    "lstm": network.predict_net,
    "gru": network.predict_net,
}

SCALE_TARGET = ("svr", "mlp", "lstm", "gru")


def fit_family(family: str, X: np.ndarray, y: np.ndarray, params: dict[str, Any], seed: int = 0) -> FittedModel:
    if family not in FITTERS:
        raise ValueError(f"unknown model family {family!r}; choose from {FAMILIES}")
    y = np.asarray(y, dtype=np.float64)
    if family in SCALE_TARGET:
        mean, scale = _target_scaling(y)
        model = FITTERS[family](X, (y - mean) / scale, params, seed)
        return FittedModel(family, dict(params), model, mean, scale)
    return FittedModel(family, dict(params), FITTERS[family](X, y, params, seed))
