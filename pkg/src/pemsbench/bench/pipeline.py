"""Grid search and the end-to-end experiment.

``run_experiment`` accepts an optional ``trace`` callable that receives
``(event, payload)`` pairs. Events, in order:

* ``"split"`` with ``train``/``val``/``test`` datasets
* ``"fit_scaler"`` with the dataset the feature scaler was fit on
* ``"fit_target_normalizer"`` with the targets the normalizer was fit on
* ``"route"`` per family with its input kind and train/val/test arrays
* ``"result"`` per family with its leaderboard row
"""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .. import dataio
from ..dataio import Dataset
from ..metrics import TargetNormalizer, evaluate, evaluate_normalized, mse
from .config import ExperimentConfig
from .families import INPUT_KIND, FittedModel, fit_family
from .report import LeaderboardRow, emit_report
from .serialize import Preprocessing, save_model

logger = logging.getLogger(__name__)

Trace = Callable[[str, dict], None]


class GridSearchError(RuntimeError):
    """Every bundle in a grid failed to train or score."""


@dataclass(frozen=True)
class Trial:
    params: dict
    val_mse: float | None
    error: str | None = None


@dataclass(frozen=True)
class GridResult:
    family: str
    best_params: dict
    val_mse: float
    model: FittedModel = field(repr=False)
    trials: tuple[Trial, ...] = ()


def grid_search(
    family: str,
    grid: Sequence[dict],
    train: tuple[np.ndarray, np.ndarray],
    val: tuple[np.ndarray, np.ndarray],
    seed: int = 0,
) -> GridResult:
    """Fit one model per bundle on ``train`` and keep the lowest validation MSE.

    Ties go to the earliest bundle. A bundle that raises, or that predicts
    non-finite values, is recorded as failed and skipped.
    """
    if not grid:
        raise ValueError(f"empty hyperparameter grid for {family!r}")
    best: tuple[float, int, FittedModel] | None = None
    trials = []
    for pos, params in enumerate(grid):
        try:
            fitted = fit_family(family, train[0], train[1], dict(params), seed)
            score = mse(fitted.predict(val[0]), val[1])
        except Exception as exc:  # one bad bundle must not sink the grid
            logger.warning("%s bundle %s failed: %s", family, params, exc)
            trials.append(Trial(dict(params), None, f"{type(exc).__name__}: {exc}"))
            continue
        trials.append(Trial(dict(params), score))
        if best is None or score < best[0]:
            best = (score, pos, fitted)
    if best is None:
        raise GridSearchError(f"all {len(grid)} {family} bundles failed; first error: {trials[0].error}")
    score, pos, fitted = best
    return GridResult(family, dict(grid[pos]), score, fitted, tuple(trials))


@dataclass(frozen=True)
class Views:
    """Train/val/test inputs for each input kind, plus aligned targets."""

    raw: tuple[np.ndarray, np.ndarray, np.ndarray]
    standardized: tuple[np.ndarray, np.ndarray, np.ndarray]
    windows: tuple[np.ndarray, np.ndarray, np.ndarray]
    targets: tuple[np.ndarray, np.ndarray, np.ndarray]
    window_targets: tuple[np.ndarray, np.ndarray, np.ndarray]

    def for_kind(self, kind: str):
        X = getattr(self, kind)
        y = self.window_targets if kind == "windows" else self.targets
        return X, y


def build_views(train: Dataset, val: Dataset, test: Dataset, scaler: dataio.Scaler, window_len: int) -> Views:
    """Route the splits into the three input views.

    Validation and test windows borrow ``window_len - 1`` feature rows from
    the preceding split, so every family is scored on the same rows.
    """
    tr, va, te = (dataio.apply_scaler(scaler, d) for d in (train, val, test))
    w_tr = dataio.make_windows(tr, window_len)
    w_va = dataio.windows_with_context(tr, va, window_len)
    w_te = dataio.windows_with_context(va, te, window_len)
    return Views(
        raw=(train.features, val.features, test.features),
        standardized=(tr.features, va.features, te.features),
        windows=(w_tr.windows, w_va.windows, w_te.windows),
        targets=(train.target, val.target, test.target),
        window_targets=(w_tr.targets, w_va.targets, w_te.targets),
    )


def load_data(cfg: ExperimentConfig) -> Dataset:
    if cfg.csv_path is not None:
        return dataio.load_csv(cfg.csv_path, cfg.target, cfg.feature_names)
    return dataio.generate_synthetic(cfg.synthetic, cfg.target)


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    leaderboard: list[LeaderboardRow]
    grids: dict[str, GridResult]
    scaler: dataio.Scaler
    normalizer: TargetNormalizer
    artifacts: dict[str, Path] = field(default_factory=dict)

    def ranking(self) -> list[str]:
        """Families with metrics, best normalized MSE first."""
        ok = [r for r in self.leaderboard if r.ok]
        return [r.family for r in sorted(ok, key=lambda r: r.normalized.mse)]


def _run_family(family: str, grid: list[dict], Xs, ys, normalizer: TargetNormalizer, target: str, seed: int):
    try:
        res = grid_search(family, grid, (Xs[0], ys[0]), (Xs[1], ys[1]), seed)
        pred = res.model.predict(Xs[2])
        row = LeaderboardRow(
            family,
            target,
            res.best_params,
            res.val_mse,
            evaluate_normalized(normalizer, pred, ys[2]),
            evaluate(pred, ys[2]),
        )
        return row, res
    except Exception as exc:
        logger.error("%s failed: %s", family, exc)
        return LeaderboardRow(family, target, {}, None, None, None, f"{type(exc).__name__}: {exc}"), None


def run_experiment(cfg: ExperimentConfig, trace: Trace | None = None) -> ExperimentResult:
    """Load, split, preprocess, grid-search every family, score on test, write artifacts."""
    emit = trace or (lambda event, payload: None)
    ds = load_data(cfg)
    train, val, test = dataio.chronological_split(ds, cfg.ratios)
    emit("split", {"train": train, "val": val, "test": test})

    scaler = dataio.fit_scaler(train)
    emit("fit_scaler", {"data": train, "scaler": scaler})
    normalizer = TargetNormalizer.fit(train.target)
    emit("fit_target_normalizer", {"y": train.target, "normalizer": normalizer})

    views = build_views(train, val, test, scaler, cfg.window_len)
    jobs = []
    for family in cfg.families:
        kind = INPUT_KIND[family]
        Xs, ys = views.for_kind(kind)
        emit("route", {"family": family, "kind": kind, "X": Xs, "y": ys})
        jobs.append((family, cfg.grid_for(family), Xs, ys, normalizer, cfg.target, cfg.seed))

    if cfg.n_jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=cfg.n_jobs) as pool:
            futures = [pool.submit(_run_family, *job) for job in jobs]
            outcomes = [f.result() for f in futures]
    else:
        outcomes = [_run_family(*job) for job in jobs]

    rows, grids = [], {}
    for (family, *_), (row, res) in zip(jobs, outcomes):
        emit("result", {"family": family, "row": row})
        rows.append(row)
        if res is not None:
            grids[family] = res
            if row.raw is not None:
                logger.info("%s: test MSE %.5g (normalized %.5g)", family, row.raw.mse, row.normalized.mse)

    result = ExperimentResult(cfg, rows, grids, scaler, normalizer)
    if cfg.out_dir is not None:
        result.artifacts = write_artifacts(result, cfg.out_dir)
    return result


def write_artifacts(result: ExperimentResult, out_dir: str | Path) -> dict[str, Path]:
    out = Path(out_dir)
    paths = emit_report(result.leaderboard, out)
    model_dir = out / "models"
    model_dir.mkdir(exist_ok=True)
    cfg = result.config
    for family, res in result.grids.items():
        kind = INPUT_KIND[family]
        prep = Preprocessing(
            cfg.target,
            tuple(result.scaler.feature_names),
            kind,
            None if kind == "raw" else result.scaler,
            cfg.window_len,
        )
        paths[f"model:{family}"] = save_model(model_dir / f"{family}.json", res.model, prep)
    return paths


def format_leaderboard(rows: Sequence[LeaderboardRow]) -> str:
    """Fixed-width text table for terminals."""
    lines = [f"{'model':<20} {'norm MSE':>11} {'norm MAE':>11} {'MSE':>11} {'MAE':>11} {'MAPE %':>9}"]
    for r in rows:
        if not r.ok:
            lines.append(f"{r.model:<20} failed: {r.error}")
            continue
        n, a = r.normalized, r.raw
        lines.append(f"{r.model:<20} {n.mse:>11.5g} {n.mae:>11.5g} {a.mse:>11.5g} {a.mae:>11.5g} {a.mape:>9.4g}")
    return "\n".join(lines)
