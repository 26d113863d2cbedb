"""Dataset ingestion, synthetic turbine data, splitting, scaling and windowing."""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

logger = logging.getLogger(__name__)

TARGETS = ("CO", "NOx")

SYNTHETIC_FEATURES = (
    "ambient_temp",
    "ambient_pressure",
    "ambient_humidity",
    "inlet_filter_dp",
    "compressor_discharge_pressure",
    "compressor_discharge_temp",
    "fuel_flow",
    "combustor_dp",
    "exhaust_temp",
    "exhaust_pressure_drop",
    "power_output",
    "shaft_speed",
    "pilot_fuel_fraction",
)

# Thermal inertia of the combustor: the exponential part of each emission
# responds to a smoothed firing temperature, not the instantaneous one.
FLAME_SMOOTHING = 0.8


class DataError(ValueError):
    """Raised for malformed inputs to the data layer."""


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=np.float64, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Dataset:
    """Time-ordered table of numeric feature columns plus one target column.

    ``features`` has shape ``(n_rows, n_features)``; column ``j`` is named
    ``feature_names[j]``. Arrays are read-only.
    """

    feature_names: tuple[str, ...]
    features: np.ndarray
    target_name: str
    target: np.ndarray
    time_ordered: bool = True
    n_dropped: int = 0

    def __post_init__(self) -> None:
        X = _frozen(self.features)
        y = _frozen(self.target)
        if X.ndim != 2 or y.ndim != 1:
            raise DataError("features must be 2-D and target 1-D")
        if X.shape[0] != y.shape[0]:
            raise DataError(f"features have {X.shape[0]} rows but target has {y.shape[0]}")
        if X.shape[0] < 1:
            raise DataError("dataset has no rows")
        if X.shape[1] != len(self.feature_names):
            raise DataError("feature_names does not match feature column count")
        if self.target_name in self.feature_names:
            raise DataError(f"target {self.target_name!r} is also listed as a feature")
        if not (np.isfinite(X).all() and np.isfinite(y).all()):
            raise DataError("dataset contains non-finite values")
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "target", y)
        object.__setattr__(self, "feature_names", tuple(self.feature_names))

    @property
    def n_rows(self) -> int:
        return int(self.target.shape[0])

    @property
    def n_features(self) -> int:
        return len(self.feature_names)

    @property
    def columns(self) -> list[tuple[str, np.ndarray]]:
        """All columns as ``(name, vector)`` pairs, features first, target last."""
        cols = [(name, self.features[:, j]) for j, name in enumerate(self.feature_names)]
        cols.append((self.target_name, self.target))
        return cols

    def column(self, name: str) -> np.ndarray:
        if name == self.target_name:
            return self.target
        try:
            return self.features[:, self.feature_names.index(name)]
        except ValueError:
            raise KeyError(name) from None

    def rows(self, start: int, stop: int) -> "Dataset":
        """Contiguous row slice ``[start, stop)``."""
        return Dataset(
            self.feature_names,
            self.features[start:stop],
            self.target_name,
            self.target[start:stop],
            self.time_ordered,
        )

    def with_features(self, features: np.ndarray) -> "Dataset":
        return Dataset(self.feature_names, features, self.target_name, self.target, self.time_ordered)

    def to_csv(self, path: str | Path) -> None:
        path = Path(path)
        with path.open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow([*self.feature_names, self.target_name])
            for xrow, yv in zip(self.features, self.target):
                writer.writerow([repr(float(v)) for v in xrow] + [repr(float(yv))])


def load_csv(
    path: str | Path,
    target_name: str,
    feature_names: Sequence[str] | None = None,
) -> Dataset:
    """Read a comma-separated file with a header row into a :class:`Dataset`.

    Rows containing NaN, infinite or empty cells in any selected column are
    dropped; the count is stored on ``Dataset.n_dropped`` and logged.
    Feature columns default to every header other than the target.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such CSV file: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path}: empty file, header row missing") from None
        if target_name not in header:
            raise DataError(f"{path}: target column {target_name!r} not found in header {header}")
        if feature_names is None:
            feature_names = [h for h in header if h != target_name]
        missing = [f for f in feature_names if f not in header]
        if missing:
            raise DataError(f"{path}: feature columns not found: {missing}")
        selected = [header.index(f) for f in feature_names] + [header.index(target_name)]

        values: list[list[float]] = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            parsed = []
            for col in selected:
                cell = row[col].strip() if col < len(row) else ""
                if cell == "":
                    parsed.append(math.nan)
                    continue
                try:
                    parsed.append(float(cell))
                except ValueError:
                    raise DataError(
                        f"{path}:{lineno}: non-numeric value {cell!r} in column {header[col]!r}"
                    ) from None
            values.append(parsed)

    table = np.array(values, dtype=np.float64).reshape(len(values), len(selected))
    finite = np.isfinite(table).all(axis=1)
    n_dropped = int((~finite).sum())
    if n_dropped:
        logger.warning("%s: dropped %d row(s) with non-finite values", path, n_dropped)
    table = table[finite]
    if table.shape[0] == 0:
        raise DataError(f"{path}: no usable rows")
    return Dataset(
        tuple(feature_names),
        table[:, :-1],
        target_name,
        table[:, -1],
        time_ordered=True,
        n_dropped=n_dropped,
    )


# ---------------------------------------------------------------------------
# synthetic turbine data


@dataclass(frozen=True)
class SyntheticSpec:
    """Parameters of the synthetic gas-turbine generator.

    ``noise_std`` is the standard deviation of the additive Gaussian noise on
    the target, in target units (ppm).
    """

    n_rows: int = 20_000
    seed: int = 0
    noise_std: float = 0.05
    n_regimes: int = 3

    def __post_init__(self) -> None:
        if self.n_rows < 1:
            raise DataError("n_rows must be >= 1")
        if not self.noise_std >= 0:
            raise DataError("noise_std must be >= 0")
        if self.n_regimes < 1:
            raise DataError("n_regimes must be >= 1")
        if self.seed < 0:
            raise DataError("seed must be >= 0")


def _ar1(rng: np.random.Generator, n: int, phi: float, sd: float) -> np.ndarray:
    e = rng.normal(0.0, sd, size=n)
    out = np.empty(n)
    acc = e[0] / math.sqrt(1.0 - phi * phi)
    for t in range(n):
        if t:
            acc = phi * acc + e[t]
        out[t] = acc
    return out


def _regime_path(rng: np.random.Generator, n: int, n_regimes: int, mean_dwell: float) -> np.ndarray:
    path = np.empty(n, dtype=np.int64)
    current = int(rng.integers(n_regimes))
    switch = rng.random(n) < 1.0 / mean_dwell
    jumps = rng.integers(1, max(n_regimes, 2), size=n)
    for t in range(n):
        if t and switch[t] and n_regimes > 1:
            current = (current + int(jumps[t])) % n_regimes
        path[t] = current
    return path


def firing_temperature(features: np.ndarray) -> np.ndarray:
    """Calculated firing temperature (deg C) from measured columns.

    Turbines do not measure firing temperature; control systems infer it
    from other sensors. Here::

        T = 1290 + 11 (power - 27) + 1.1 (ambient_temp - 15)
                 + 0.5 (exhaust_temp - 560) + 150 (pilot - 0.08)
    """
    X = _synthetic_matrix(features)
    c = {name: X[:, j] for j, name in enumerate(SYNTHETIC_FEATURES)}
    return (
        1290.0
        + 11.0 * (c["power_output"] - 27.0)
        + 1.1 * (c["ambient_temp"] - 15.0)
        + 0.5 * (c["exhaust_temp"] - 560.0)
        + 150.0 * (c["pilot_fuel_fraction"] - 0.08)
    )


def smoothed(values: np.ndarray, alpha: float = FLAME_SMOOTHING) -> np.ndarray:
    """Exponential smoothing ``acc += alpha (v - acc)``, seeded with the first value."""
    out = np.empty_like(values, dtype=np.float64)
    acc = float(values[0])
    for t, v in enumerate(values):
        acc = acc + alpha * (float(v) - acc)
        out[t] = acc
    return out


def _synthetic_matrix(features: np.ndarray) -> np.ndarray:
    X = np.asarray(features, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != len(SYNTHETIC_FEATURES):
        raise DataError(f"expected {len(SYNTHETIC_FEATURES)} synthetic feature columns")
    return X


def ground_truth(features: np.ndarray, target: str) -> np.ndarray:
    """Noise-free emission (ppm) implied by a time-ordered synthetic feature matrix.

    Columns follow ``SYNTHETIC_FEATURES``. ``T`` is the calculated firing
    temperature of :func:`firing_temperature` and ``Ts`` its smoothed
    history (see :func:`smoothed`); ``H`` is humidity, ``P`` the pilot fuel
    fraction, ``Pc`` compressor discharge pressure and ``L = power / 30``.
    A combustor tuning ripple depends on ``T`` and on the operating-line
    coordinate ``U = 12 (ambient_temp - 15) - 10 (power - 27)``::

        R   = sin(2 pi T / 12) sin(2 pi U / 16)
        NOx = 24 exp(0.02 (Ts - 1290)) (1 - 0.005 (H - 60)) (1 + 2 P) + 0.6 (Pc - 17) + 1.5 R
        CO  = 3 + 45 exp(-0.025 (Ts - 1200)) (1 + 3 P) + 4 (1 - L)^2 + 0.3 R
    """
    X = _synthetic_matrix(features)
    if target not in TARGETS:
        raise DataError(f"unknown target {target!r}; expected one of {TARGETS}")
    c = {name: X[:, j] for j, name in enumerate(SYNTHETIC_FEATURES)}
    T = firing_temperature(X)
    Ts = smoothed(T)
    U = 12.0 * (c["ambient_temp"] - 15.0) - 10.0 * (c["power_output"] - 27.0)
    ripple = np.sin(2 * np.pi * T / 12.0) * np.sin(2 * np.pi * U / 16.0)
    pilot = c["pilot_fuel_fraction"]
    if target == "NOx":
        humid = 1.0 - 0.005 * (c["ambient_humidity"] - 60.0)
        return (
            24.0 * np.exp(0.02 * (Ts - 1290.0)) * humid * (1.0 + 2.0 * pilot)
            + 0.6 * (c["compressor_discharge_pressure"] - 17.0)
            + 1.5 * ripple
        )
    load = c["power_output"] / 30.0
    return 3.0 + 45.0 * np.exp(-0.025 * (Ts - 1200.0)) * (1.0 + 3.0 * pilot) + 4.0 * (1.0 - load) ** 2 + 0.3 * ripple


def synthetic_features(spec: SyntheticSpec) -> np.ndarray:
    """The 13-column feature matrix for ``spec``; independent of the noise level.

    Latent state: a unit load that tracks the set-point of a sticky Markov
    regime plus AR(1) fluctuations, and an ambient temperature with daily
    and slower cycles. Every sensor is a smooth function of that state with
    small Gaussian measurement noise, so rows lie close to a low-dimensional
    operating manifold.
    """
    n, R = spec.n_rows, spec.n_regimes
    rng = np.random.default_rng([spec.seed, 0])

    # Per-regime operating point: load set-point, exhaust sensitivity to load,
    # exhaust offset and pilot share. Regimes are well separated in pilot share.
    setpoints = np.linspace(0.78, 0.97, R) if R > 1 else np.array([0.9])
    exhaust_gain = rng.uniform(70.0, 110.0, size=R)
    exhaust_offset = np.linspace(-2.4, 2.4, R)[rng.permutation(R)] if R > 1 else np.zeros(1)
    pilot_base = np.linspace(0.04, 0.12, R)[rng.permutation(R)] if R > 1 else np.array([0.08])

    regime = _regime_path(rng, n, R, mean_dwell=300.0)
    t = np.arange(n, dtype=np.float64)

    load = np.empty(n)
    dev = _ar1(rng, n, 0.95, 0.012)
    target_load = setpoints[regime]
    acc = target_load[0]
    for i in range(n):
        acc += 0.08 * (target_load[i] - acc)
        load[i] = acc
    load = np.clip(load + dev, 0.5, 1.05)
    amb = 15.0 + 7.0 * np.sin(2 * np.pi * t / 144.0) + 3.0 * np.sin(2 * np.pi * t / 1500.0) + _ar1(rng, n, 0.98, 0.25)

    def sensor(sd: float) -> np.ndarray:
        return rng.normal(0.0, sd, size=n)

    cols = {
        "ambient_temp": amb + sensor(0.005),
        "ambient_pressure": 1.013 - 0.0004 * (amb - 15.0) + sensor(0.00002),
        "ambient_humidity": np.clip(62.0 - 1.4 * (amb - 15.0), 10.0, 100.0) + sensor(0.025),
        "inlet_filter_dp": 6.0 + 4.0 * load + 0.02 * amb + sensor(0.004),
        "compressor_discharge_pressure": 9.0 + 9.0 * load - 0.035 * (amb - 15.0) + sensor(0.0025),
        "compressor_discharge_temp": 340.0 + 90.0 * load + 0.9 * amb + sensor(0.04),
        "fuel_flow": 1.1 + 1.7 * load - 0.006 * (amb - 15.0) + sensor(0.0005),
        "combustor_dp": 0.3 + 0.25 * load + sensor(0.00025),
        "exhaust_temp": 470.0 + exhaust_gain[regime] * load + 0.8 * amb + exhaust_offset[regime] + sensor(0.05),
        "exhaust_pressure_drop": 20.0 + 12.0 * load**2 + sensor(0.0075),
        "power_output": 30.0 * load * (1.0 - 0.006 * (amb - 15.0)) + sensor(0.005),
        "shaft_speed": 3000.0 + 40.0 * (load - 0.9) + sensor(0.025),
        "pilot_fuel_fraction": np.clip(pilot_base[regime] - 0.04 * (load - 0.9) + sensor(0.00015), 0.0, 0.3),
    }
    return np.column_stack([cols[name] for name in SYNTHETIC_FEATURES])


def generate_synthetic(spec: SyntheticSpec, target: str) -> Dataset:
    """Deterministic synthetic gas-turbine dataset for ``target`` (``"CO"`` or ``"NOx"``).

    Features come from a regime-switching operating model with daily ambient
    cycles; the target is :func:`ground_truth` plus Gaussian noise with
    standard deviation ``spec.noise_std``. Features do not depend on
    ``noise_std``, so datasets that differ only in noise share their inputs.
    """
    if target not in TARGETS:
        raise DataError(f"unknown target {target!r}; expected one of {TARGETS}")
    X = synthetic_features(spec)
    y = ground_truth(X, target)
    noise_rng = np.random.default_rng([spec.seed, 1, TARGETS.index(target)])
    y = y + spec.noise_std * noise_rng.standard_normal(spec.n_rows)
    return Dataset(SYNTHETIC_FEATURES, X, target, y, time_ordered=True)


# ---------------------------------------------------------------------------
# splitting


def split_sizes(n: int, ratios: Sequence[float]) -> tuple[int, int, int]:
    """Floor allocation of ``n`` rows; the remainder goes to the training split."""
    if len(ratios) != 3:
        raise DataError("ratios must have three entries (train, val, test)")
    if any(not r > 0 for r in ratios):
        raise DataError(f"split ratios must be positive, got {tuple(ratios)}")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise DataError(f"split ratios must sum to 1, got {sum(ratios)!r}")
    n_val = int(math.floor(n * ratios[1]))
    n_test = int(math.floor(n * ratios[2]))
    n_train = n - n_val - n_test
    if min(n_train, n_val, n_test) < 1:
        raise DataError(f"split of {n} rows by {tuple(ratios)} leaves an empty split")
    return n_train, n_val, n_test


def chronological_split(ds: Dataset, ratios: Sequence[float] = (0.7, 0.15, 0.15)) -> tuple[Dataset, Dataset, Dataset]:
    """Contiguous train/validation/test partition preserving row order."""
    if not ds.time_ordered:
        raise DataError("chronological_split requires a time-ordered dataset")
    n_train, n_val, _ = split_sizes(ds.n_rows, ratios)
    a, b = n_train, n_train + n_val
    return ds.rows(0, a), ds.rows(a, b), ds.rows(b, ds.n_rows)


# ---------------------------------------------------------------------------
# standardization


@dataclass(frozen=True)
class Scaler:
    """Per-feature mean and population standard deviation.

    Zero-variance columns get ``std = 1`` so they map to all zeros.
    """

    feature_names: tuple[str, ...]
    means: np.ndarray
    stds: np.ndarray
    fitted_on: int
    guarded: tuple[str, ...] = field(default=())

    def __post_init__(self) -> None:
        object.__setattr__(self, "means", _frozen(self.means))
        object.__setattr__(self, "stds", _frozen(self.stds))
        if not (len(self.means) == len(self.stds) == len(self.feature_names)):
            raise DataError("scaler statistics do not match feature count")
        if not (self.stds > 0).all():
            raise DataError("scaler stds must be strictly positive")

    def transform(self, X: np.ndarray) -> np.ndarray:
        return (np.asarray(X, dtype=np.float64) - self.means) / self.stds

    def inverse(self, Z: np.ndarray) -> np.ndarray:
        return np.asarray(Z, dtype=np.float64) * self.stds + self.means

    def to_dict(self) -> dict:
        return {
            "feature_names": list(self.feature_names),
            "means": self.means.tolist(),
            "stds": self.stds.tolist(),
            "fitted_on": self.fitted_on,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Scaler":
        return cls(tuple(d["feature_names"]), np.array(d["means"]), np.array(d["stds"]), int(d["fitted_on"]))


def fit_scaler(train: Dataset) -> Scaler:
    X = train.features
    means = X.mean(axis=0)
    stds = X.std(axis=0)  # population convention (ddof=0)
    degenerate = ~(stds > 0)
    guarded = tuple(name for name, bad in zip(train.feature_names, degenerate) if bad)
    if guarded:
        logger.warning("zero-variance feature column(s) %s: std set to 1", ", ".join(guarded))
        stds = np.where(degenerate, 1.0, stds)
    return Scaler(train.feature_names, means, stds, train.n_rows, guarded)


def apply_scaler(sc: Scaler, ds: Dataset) -> Dataset:
    if tuple(ds.feature_names) != tuple(sc.feature_names):
        raise DataError(
            f"feature schema mismatch: scaler fit on {list(sc.feature_names)}, got {list(ds.feature_names)}"
        )
    return ds.with_features(sc.transform(ds.features))


# ---------------------------------------------------------------------------
# windowing


@dataclass(frozen=True)
class SequenceDataset:
    """Overlapping windows of shape ``(n_windows, window_len, n_features)``.

    Window ``i`` covers source rows ``[i, i + window_len)`` and is labelled with
    the target at row ``i + window_len - 1``.
    """

    windows: np.ndarray
    targets: np.ndarray
    window_len: int
    feature_names: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "windows", _frozen(self.windows))
        object.__setattr__(self, "targets", _frozen(self.targets))

    def __len__(self) -> int:
        return int(self.targets.shape[0])


def make_windows(ds: Dataset, w: int = 8) -> SequenceDataset:
    if w < 1:
        raise DataError("window length must be >= 1")
    if ds.n_rows < w:
        raise DataError(f"window length {w} exceeds dataset length {ds.n_rows}")
    view = np.lib.stride_tricks.sliding_window_view(ds.features, w, axis=0)  # (n-w+1, d, w)
    windows = np.ascontiguousarray(view.transpose(0, 2, 1))
    return SequenceDataset(windows, ds.target[w - 1 :], w, ds.feature_names)


def windows_with_context(context: Dataset | None, ds: Dataset, w: int) -> SequenceDataset:
    """Windows labelled by every row of ``ds``, borrowing the last ``w - 1`` rows of ``context``.

    Used for validation/test splits so that sequence models are scored on
    exactly the same rows as tabular models. Only past feature values are
    borrowed; no targets from ``context`` are used.
    """
    if w == 1 or context is None:
        return make_windows(ds, w)
    if context.n_rows < w - 1:
        raise DataError("context split is shorter than window_len - 1")
    tail = context.rows(context.n_rows - (w - 1), context.n_rows)
    joined = Dataset(
        ds.feature_names,
        np.vstack([tail.features, ds.features]),
        ds.target_name,
        np.concatenate([tail.target, ds.target]),
    )
    return make_windows(joined, w)
