"""Leaderboard rows, CSV emission/parsing and the grouped bar chart."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence
from xml.sax.saxutils import escape

from ..metrics import MetricReport
from .families import DISPLAY_NAMES

METRIC_NAMES = ("mse", "rmse", "mae", "mape")

LEADERBOARD_HEADER = (
    "model",
    "family",
    "target",
    *(f"norm_{m}" for m in METRIC_NAMES),
    *METRIC_NAMES,
    "n_test",
    "n_excluded_mape",
    "val_mse",
    "params",
    "error",
)


class ReportError(OSError):
    """Report files could not be written."""


@dataclass(frozen=True)
class LeaderboardRow:
    family: str
    target: str
    params: dict = field(default_factory=dict)
    val_mse: float | None = None
    normalized: MetricReport | None = None
    raw: MetricReport | None = None
    error: str | None = None

    @property
    def model(self) -> str:
        return DISPLAY_NAMES.get(self.family, self.family)

    @property
    def ok(self) -> bool:
        return self.error is None and self.normalized is not None and self.raw is not None


def _g(x: float | None) -> str:
    return "" if x is None else f"{x:.5g}"


def _row_cells(r: LeaderboardRow) -> list[str]:
    norm = [getattr(r.normalized, m) if r.normalized else None for m in METRIC_NAMES]
    raw = [getattr(r.raw, m) if r.raw else None for m in METRIC_NAMES]
    return [
        r.model,
        r.family,
        r.target,
        *(_g(v) for v in norm),
        *(_g(v) for v in raw),
        str(r.raw.n_evaluated) if r.raw else "",
        str(r.raw.n_excluded_mape) if r.raw else "",
        _g(r.val_mse),
        json.dumps(r.params, sort_keys=True, separators=(",", ":")),
        r.error or "",
    ]


def leaderboard_csv(rows: Iterable[LeaderboardRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(LEADERBOARD_HEADER)
    for r in rows:
        w.writerow(_row_cells(r))
    return buf.getvalue()


def _f(s: str) -> float | None:
    return float(s) if s != "" else None


def parse_leaderboard(text: str) -> list[LeaderboardRow]:
    """Inverse of :func:`leaderboard_csv` up to the 5-digit rounding."""
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header is None or tuple(header) != LEADERBOARD_HEADER:
        raise ValueError("not a leaderboard CSV (header mismatch)")
    out = []
    for cells in reader:
        if not cells:
            continue
        if len(cells) != len(LEADERBOARD_HEADER):
            raise ValueError(f"leaderboard row has {len(cells)} cells, expected {len(LEADERBOARD_HEADER)}")
        c = dict(zip(LEADERBOARD_HEADER, cells))
        norm = raw = None
        if c["mse"] != "":
            n_eval, n_exc = int(c["n_test"]), int(c["n_excluded_mape"])
            norm = MetricReport(*(float(c[f"norm_{m}"]) for m in METRIC_NAMES), n_eval, n_exc)
            raw = MetricReport(*(float(c[m]) for m in METRIC_NAMES), n_eval, n_exc)
        out.append(
            LeaderboardRow(
                family=c["family"],
                target=c["target"],
                params=json.loads(c["params"]) if c["params"] else {},
                val_mse=_f(c["val_mse"]),
                normalized=norm,
                raw=raw,
                error=c["error"] or None,
            )
        )
    return out


def read_leaderboard(path: str | Path) -> list[LeaderboardRow]:
    return parse_leaderboard(Path(path).read_text(encoding="utf-8"))


def table1_csv(rows: Sequence[LeaderboardRow]) -> str:
    """Wide layout: one line per model, normalized MSE/RMSE/MAE/MAPE per target."""
    targets = sorted({r.target for r in rows})
    models: dict[str, dict[str, LeaderboardRow]] = {}
    for r in rows:
        models.setdefault(r.model, {})[r.target] = r
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["model", *(f"{t}_{m.upper()}" for t in targets for m in METRIC_NAMES)])
    for model, by_target in models.items():
        cells = [model]
        for t in targets:
            r = by_target.get(t)
            cells += [_g(getattr(r.normalized, m)) if r and r.normalized else "" for m in METRIC_NAMES]
        w.writerow(cells)
    return buf.getvalue()


# ---------------------------------------------------------------------------
# chart

_COLOURS = ("#4c72b0", "#dd8452", "#55a868", "#c44e52")
_W, _H = 900, 420
_LEFT, _RIGHT, _TOP, _BOTTOM = 70, 20, 40, 90


def _log_range(values: list[float]) -> tuple[int, int]:
    pos = [v for v in values if v > 0 and math.isfinite(v)]
    if not pos:
        return -4, 2
    lo, hi = math.floor(math.log10(min(pos))), math.ceil(math.log10(max(pos)))
    return lo, max(hi, lo + 1)


def svg_chart(rows: Sequence[LeaderboardRow], title: str = "Normalized test metrics") -> str:
    """Grouped bars on a log value axis: one group per model, one bar per metric.

    Rows without metrics are skipped. Non-positive values are drawn as
    zero-height bars so that the bar count stays models x metrics.
    """
    rows = [r for r in rows if r.normalized is not None]
    values = [getattr(r.normalized, m) for r in rows for m in METRIC_NAMES]
    lo, hi = _log_range(values)
    plot_w = _W - _LEFT - _RIGHT
    plot_h = _H - _TOP - _BOTTOM
    y0 = _TOP + plot_h

    def ypos(v: float) -> float:
        if not (v > 0 and math.isfinite(v)):
            return y0
        t = (math.log10(v) - lo) / (hi - lo)
        return y0 - min(max(t, 0.0), 1.0) * plot_h

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" viewBox="0 0 {_W} {_H}">',
        f'<text x="{_W / 2:.1f}" y="22" text-anchor="middle" font-family="sans-serif" font-size="15">{escape(title)}</text>',
        f'<line class="axis" x1="{_LEFT}" y1="{_TOP}" x2="{_LEFT}" y2="{y0}" stroke="black"/>',
        f'<line class="axis" x1="{_LEFT}" y1="{y0}" x2="{_W - _RIGHT}" y2="{y0}" stroke="black"/>',
    ]
    for e in range(lo, hi + 1):
        y = y0 - (e - lo) / (hi - lo) * plot_h
        out.append(f'<line class="tick" x1="{_LEFT - 5}" y1="{y:.2f}" x2="{_W - _RIGHT}" y2="{y:.2f}" stroke="#dddddd"/>')
        out.append(
            f'<text x="{_LEFT - 8}" y="{y + 4:.2f}" text-anchor="end" font-family="sans-serif" font-size="11">1e{e}</text>'
        )
    if rows:
        group_w = plot_w / len(rows)
        bar_w = group_w * 0.8 / len(METRIC_NAMES)
        for g, r in enumerate(rows):
            gx = _LEFT + g * group_w + group_w * 0.1
            for k, m in enumerate(METRIC_NAMES):
                v = getattr(r.normalized, m)
                y = ypos(v)
                out.append(
                    f'<rect class="bar" data-model="{escape(r.model)}" data-metric="{m}" data-value="{v:.5g}" '
                    f'x="{gx + k * bar_w:.2f}" y="{y:.2f}" width="{bar_w:.2f}" height="{y0 - y:.2f}" fill="{_COLOURS[k]}"/>'
                )
            cx = gx + group_w * 0.4
            out.append(
                f'<text x="{cx:.2f}" y="{y0 + 16}" text-anchor="middle" font-family="sans-serif" font-size="11">'
                f"{escape(r.model)}</text>"
            )
    for k, m in enumerate(METRIC_NAMES):
        lx = _LEFT + k * 110
        out.append(f'<rect class="legend" x="{lx}" y="{_H - 30}" width="12" height="12" fill="{_COLOURS[k]}"/>')
        out.append(
            f'<text x="{lx + 18}" y="{_H - 20}" font-family="sans-serif" font-size="12">{m.upper()}</text>'
        )
    out.append("</svg>")
    return "\n".join(out) + "\n"


def emit_report(rows: Sequence[LeaderboardRow], out_dir: str | Path) -> dict[str, Path]:
    """Write ``leaderboard.csv`` and ``chart.svg`` into ``out_dir``."""
    out = Path(out_dir)
    paths = {"leaderboard": out / "leaderboard.csv", "chart": out / "chart.svg"}
    title = "Normalized test metrics"
    targets = sorted({r.target for r in rows})
    if targets:
        title += " (" + ", ".join(targets) + ")"
    try:
        out.mkdir(parents=True, exist_ok=True)
        paths["leaderboard"].write_text(leaderboard_csv(rows), encoding="utf-8")
        paths["chart"].write_text(svg_chart(rows, title), encoding="utf-8")
    except OSError as exc:
        raise ReportError(f"cannot write report to {out}: {exc.strerror or exc}") from exc
    return paths
