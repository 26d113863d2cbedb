"""Experiment configuration files.

Configs are TOML documents with four kinds of table::

    [data]
    source = "synthetic"          # or "csv"
    path = "plant.csv"            # csv only; relative to the config file
    target = "NOx"                # "CO" or "NOx", any case
    features = ["a", "b"]         # csv only; default is every other column
    n_rows = 20000                # synthetic only
    noise_std = 0.05              # synthetic only
    n_regimes = 3                 # synthetic only

    [split]
    ratios = [0.7, 0.15, 0.15]
    window_len = 8

    [experiment]
    seed = 0
    families = ["linear", "knn"]  # default: all eight
    grid = "default"              # "default" or "paper"
    out_dir = "results"           # relative to the config file
    n_jobs = 1

    [[grid.knn]]                  # optional explicit bundles, one table each
    n_neighbors = 4
    weights = "distance"

Every table and key is optional. Unknown tables or keys are rejected.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Mapping

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

from ..dataio import TARGETS, SyntheticSpec
from .families import FAMILIES, default_grid, paper_bundle

GRID_MODES = ("default", "paper")


class ConfigError(ValueError):
    """Invalid experiment configuration."""


def parse_target(name: str) -> str:
    for t in TARGETS:
        if str(name).lower() == t.lower():
            return t
    raise ConfigError(f"unknown target {name!r}; expected one of {', '.join(TARGETS)}")


@dataclass(frozen=True)
class ExperimentConfig:
    target: str = "NOx"
    csv_path: str | None = None
    feature_names: tuple[str, ...] | None = None
    synthetic: SyntheticSpec | None = field(default_factory=SyntheticSpec)
    ratios: tuple[float, float, float] = (0.7, 0.15, 0.15)
    window_len: int = 8
    families: tuple[str, ...] = FAMILIES
    grid_mode: str = "default"
    grids: Mapping[str, tuple[dict, ...]] = field(default_factory=dict)
    seed: int = 0
    out_dir: str | None = None
    n_jobs: int = 1

    def __post_init__(self) -> None:
        object.__setattr__(self, "target", parse_target(self.target))
        if (self.csv_path is None) == (self.synthetic is None):
            raise ConfigError("exactly one data source (csv path or synthetic spec) is required")
        if not self.families:
            raise ConfigError("at least one model family must be enabled")
        unknown = [f for f in self.families if f not in FAMILIES]
        if unknown:
            raise ConfigError(f"unknown model family {unknown[0]!r}; choose from {', '.join(FAMILIES)}")
        if len(set(self.families)) != len(self.families):
            raise ConfigError("model families listed more than once")
        if len(self.ratios) != 3 or any(not r > 0 for r in self.ratios) or abs(sum(self.ratios) - 1.0) > 1e-9:
            raise ConfigError(f"split ratios must be three positive numbers summing to 1, got {self.ratios}")
        if self.window_len < 1:
            raise ConfigError("window_len must be >= 1")
        if self.grid_mode not in GRID_MODES:
            raise ConfigError(f"grid must be one of {GRID_MODES}, got {self.grid_mode!r}")
        for fam, bundles in self.grids.items():
            if fam not in FAMILIES:
                raise ConfigError(f"grid given for unknown family {fam!r}")
            if not bundles:
                raise ConfigError(f"grid for {fam!r} is empty")
        if self.n_jobs < 1:
            raise ConfigError("n_jobs must be >= 1")
        if self.seed < 0:
            raise ConfigError("seed must be >= 0")

    def grid_for(self, family: str) -> list[dict[str, Any]]:
        if family in self.grids:
            return [dict(b) for b in self.grids[family]]
        if self.grid_mode == "paper":
            return [paper_bundle(family, self.target)]
        return default_grid(family, self.target)

    def with_overrides(self, *, seed: int | None = None, target: str | None = None, out_dir: str | None = None,
                       families: tuple[str, ...] | None = None) -> "ExperimentConfig":
        changes: dict[str, Any] = {}
        if seed is not None:
            changes["seed"] = int(seed)
            if self.synthetic is not None:
                changes["synthetic"] = replace(self.synthetic, seed=int(seed))
        if target is not None:
            changes["target"] = parse_target(target)
        if out_dir is not None:
            changes["out_dir"] = str(out_dir)
        if families is not None:
            changes["families"] = tuple(families)
        return replace(self, **changes)


_KEYS = {
    "data": {"source", "path", "target", "features", "n_rows", "noise_std", "n_regimes"},
    "split": {"ratios", "window_len"},
    "experiment": {"seed", "families", "grid", "out_dir", "n_jobs"},
}


def _check_keys(table: str, got: Mapping) -> None:
    extra = sorted(set(got) - _KEYS[table])
    if extra:
        raise ConfigError(f"unknown key {extra[0]!r} in [{table}]")


def config_from_dict(doc: Mapping[str, Any], base_dir: Path | None = None) -> ExperimentConfig:
    """Build a config from a parsed TOML document."""
    extra = sorted(set(doc) - {*_KEYS, "grid"})
    if extra:
        raise ConfigError(f"unknown table [{extra[0]}]")
    data = dict(doc.get("data", {}))
    split = dict(doc.get("split", {}))
    exp = dict(doc.get("experiment", {}))
    for name, table in (("data", data), ("split", split), ("experiment", exp)):
        _check_keys(name, table)

    def rel(p: str) -> str:
        path = Path(p)
        return str(base_dir / path) if base_dir is not None and not path.is_absolute() else str(path)

    seed = int(exp.get("seed", 0))
    source = data.get("source", "csv" if "path" in data else "synthetic")
    kw: dict[str, Any] = {}
    if source == "csv":
        if "path" not in data:
            raise ConfigError("[data] source = \"csv\" needs a path")
        bad = {"n_rows", "noise_std", "n_regimes"} & set(data)
        if bad:
            raise ConfigError(f"key {sorted(bad)[0]!r} only applies to synthetic data")
        kw["csv_path"] = rel(data["path"])
        kw["synthetic"] = None
        if "features" in data:
            kw["feature_names"] = tuple(str(f) for f in data["features"])
    elif source == "synthetic":
        if "path" in data or "features" in data:
            raise ConfigError("path/features only apply to csv data")
        defaults = SyntheticSpec()
        try:
            kw["synthetic"] = SyntheticSpec(
                n_rows=int(data.get("n_rows", defaults.n_rows)),
                seed=seed,
                noise_std=float(data.get("noise_std", defaults.noise_std)),
                n_regimes=int(data.get("n_regimes", defaults.n_regimes)),
            )
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"[data] {exc}") from exc
    else:
        raise ConfigError(f"[data] source must be \"csv\" or \"synthetic\", got {source!r}")

    grids_doc = doc.get("grid", {})
    if not isinstance(grids_doc, Mapping):
        raise ConfigError("[grid] must be a table of per-family bundle arrays")
    grids = {}
    for fam, bundles in grids_doc.items():
        if isinstance(bundles, Mapping):
            bundles = [bundles]
        if not isinstance(bundles, list) or not all(isinstance(b, Mapping) for b in bundles):
            raise ConfigError(f"grid.{fam} must be an array of tables")
        grids[fam] = tuple(dict(b) for b in bundles)

    try:
        return ExperimentConfig(
            target=data.get("target", "NOx"),
            ratios=tuple(float(r) for r in split.get("ratios", (0.7, 0.15, 0.15))),
            window_len=int(split.get("window_len", 8)),
            families=tuple(exp.get("families", FAMILIES)),
            grid_mode=str(exp.get("grid", "default")),
            grids=grids,
            seed=seed,
            out_dir=rel(exp["out_dir"]) if "out_dir" in exp else None,
            n_jobs=int(exp.get("n_jobs", 1)),
            **kw,
        )
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    try:
        with path.open("rb") as fh:
            doc = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return config_from_dict(doc, path.parent)
