"""Model bundles: one JSON file per trained model, with its preprocessing.

Neural networks keep their weights in a binary sidecar next to the JSON
file (``<stem>.weights.bin``); the JSON records the sidecar's file name.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .. import dataio, linear_model, neighbors, svr, trees
from ..dataio import Dataset, Scaler
from ..neural import network
from .families import INPUT_KIND, FittedModel

FORMAT = "pemsbench-model"
VERSION = 1

_CODECS = {
    "linear": linear_model.LinearModel,
    "svr": svr.SvrModel,
    "cart": trees.RegressionTree,
    "gbt": trees.GbtModel,
    "knn": neighbors.KnnModel,
}


@dataclass(frozen=True)
class Preprocessing:
    """How raw CSV rows become model inputs."""

    target: str
    feature_names: tuple[str, ...]
    input_kind: str
    scaler: Scaler | None
    window_len: int = 8

    def to_dict(self) -> dict:
        return {
            "target": self.target,
            "feature_names": list(self.feature_names),
            "input_kind": self.input_kind,
            "scaler": self.scaler.to_dict() if self.scaler is not None else None,
            "window_len": self.window_len,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Preprocessing":
        sc = Scaler.from_dict(d["scaler"]) if d.get("scaler") else None
        return cls(d["target"], tuple(d["feature_names"]), d["input_kind"], sc, int(d["window_len"]))


def prepare_inputs(prep: Preprocessing, ds: Dataset) -> tuple[np.ndarray, np.ndarray]:
    """Model inputs and aligned targets for ``ds``.

    Sequence models lose the first ``window_len - 1`` rows, which only
    serve as context.
    """
    if tuple(ds.feature_names) != prep.feature_names:
        raise dataio.DataError(
            f"feature schema mismatch: model expects {list(prep.feature_names)}, got {list(ds.feature_names)}"
        )
    if prep.input_kind == "raw":
        return ds.features, ds.target
    scaled = dataio.apply_scaler(prep.scaler, ds)
    if prep.input_kind == "windows":
        seq = dataio.make_windows(scaled, prep.window_len)
        return seq.windows, seq.targets
    return scaled.features, scaled.target


def save_model(path: str | Path, fitted: FittedModel, prep: Preprocessing) -> Path:
    path = Path(path)
    doc = {
        "format": FORMAT,
        "version": VERSION,
        "family": fitted.family,
        "params": fitted.params,
        "y_mean": fitted.y_mean,
        "y_scale": fitted.y_scale,
        "preprocessing": prep.to_dict(),
    }
    if fitted.family in _CODECS:
        doc["model"] = fitted.model.to_dict()
    else:
        sidecar = path.with_name(path.name.removesuffix(".json") + ".weights.bin")
        network.save_net(fitted.model, sidecar)
        doc["weights"] = sidecar.name
    path.write_text(json.dumps(doc, sort_keys=True), encoding="utf-8")
    return path


def load_model(path: str | Path) -> tuple[FittedModel, Preprocessing]:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ValueError(f"{path}: not a model bundle ({exc})") from None
    if doc.get("format") != FORMAT:
        raise ValueError(f"{path}: not a model bundle")
    if doc.get("version") != VERSION:
        raise ValueError(f"{path}: unsupported bundle version {doc.get('version')!r}")
    family = doc["family"]
    if family in _CODECS:
        model = _CODECS[family].from_dict(doc["model"])
    elif family in INPUT_KIND:
        model = network.load_net(path.with_name(doc["weights"]))
    else:
        raise ValueError(f"{path}: unknown model family {family!r}")
    fitted = FittedModel(family, doc["params"], model, float(doc["y_mean"]), float(doc["y_scale"]))
    return fitted, Preprocessing.from_dict(doc["preprocessing"])
