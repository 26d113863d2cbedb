"""Command-line entry point: ``pemsbench <command> [options]``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import dataio
from .bench import pipeline, report
from .bench.config import ConfigError, ExperimentConfig, load_config, parse_target
from .bench.families import FAMILIES
from .bench.serialize import load_model, prepare_inputs
from .metrics import CSV_HEADER, evaluate

log = logging.getLogger("pemsbench")


def _config(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    return cfg.with_overrides(seed=args.seed, target=args.target, out_dir=args.out)


def cmd_generate(args) -> int:
    target = parse_target(args.target or "nox")
    spec = dataio.SyntheticSpec(n_rows=args.rows, seed=args.seed or 0, noise_std=args.noise)
    ds = dataio.generate_synthetic(spec, target)
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"synthetic_{target.lower()}_seed{spec.seed}.csv"
    ds.to_csv(path)
    print(path)
    return 0


def _run(cfg: ExperimentConfig) -> int:
    result = pipeline.run_experiment(cfg)
    print(pipeline.format_leaderboard(result.leaderboard))
    for name, path in result.artifacts.items():
        log.info("wrote %s: %s", name, path)
    if result.artifacts:
        print(f"artifacts written to {cfg.out_dir}")
    return 0 if all(r.ok for r in result.leaderboard) else 1


def cmd_benchmark(args) -> int:
    return _run(_config(args))


def cmd_train(args) -> int:
    return _run(_config(args).with_overrides(families=(args.family,)))


def cmd_evaluate(args) -> int:
    fitted, prep = load_model(args.model)
    ds = dataio.load_csv(args.data, prep.target, prep.feature_names)
    X, y = prepare_inputs(prep, ds)
    rep = evaluate(fitted.predict(X), y)
    line = rep.csv_row(fitted.family, prep.target)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "metrics.csv").write_text(",".join(CSV_HEADER) + "\n" + ",".join(line) + "\n", encoding="utf-8")
    print(json.dumps({"family": fitted.family, "target": prep.target, **rep.as_dict()}, sort_keys=True))
    return 0


def cmd_report(args) -> int:
    rows = []
    for path in args.leaderboard:
        rows += report.read_leaderboard(path)
    out = Path(args.out or ".")
    try:
        out.mkdir(parents=True, exist_ok=True)
        (out / "chart.svg").write_text(report.svg_chart(rows), encoding="utf-8")
        (out / "table1.csv").write_text(report.table1_csv(rows), encoding="utf-8")
    except OSError as exc:
        raise report.ReportError(f"cannot write report to {out}: {exc.strerror or exc}") from exc
    print(out / "chart.svg")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pemsbench", description="Emission-prediction model benchmark.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config=True):
        if config:
            sp.add_argument("--config", metavar="PATH", help="experiment config (TOML)")
        sp.add_argument("--seed", type=int, metavar="N")
        sp.add_argument("--out", metavar="DIR")
        sp.add_argument("--target", type=str.lower, choices=("co", "nox"))

    g = sub.add_parser("generate", help="write a synthetic dataset as CSV")
    common(g, config=False)
    g.add_argument("--rows", type=int, default=dataio.SyntheticSpec.n_rows)
    g.add_argument("--noise", type=float, default=dataio.SyntheticSpec.noise_std)
    g.set_defaults(func=cmd_generate)

    b = sub.add_parser("benchmark", help="run the full experiment from a config")
    common(b)
    b.set_defaults(func=cmd_benchmark)

    t = sub.add_parser("train", help="grid-search and evaluate a single family")
    common(t)
    t.add_argument("--family", required=True, choices=FAMILIES)
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("evaluate", help="score a saved model on a CSV file")
    e.add_argument("--model", required=True, metavar="PATH")
    e.add_argument("--data", required=True, metavar="CSV")
    e.add_argument("--out", metavar="DIR")
    e.set_defaults(func=cmd_evaluate)

    r = sub.add_parser("report", help="render leaderboard CSVs as a chart and a wide table")
    r.add_argument("leaderboard", nargs="+", metavar="CSV")
    r.add_argument("--out", metavar="DIR")
    r.set_defaults(func=cmd_report)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, dataio.DataError, report.ReportError, ValueError, OSError) as exc:
        print(f"pemsbench: error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # anything else still gets one diagnostic line
        log.debug("unexpected failure", exc_info=True)
        print(f"pemsbench: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
