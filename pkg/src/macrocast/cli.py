"""Command-line entry point: ``macrocast <subcommand>``.

Exit codes: 0 success, 1 configuration error, 2 data error, 3 internal failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .data_model import DEFAULT_PERIODS, VARIABLES, MonthStamp, summarize
from .errors import ConfigInvalid, DataError, MacrocastError
from .harness import MODELS, RunConfig, metrics_markdown, run
from .ingest import IngestConfig, ingest, read_panel_csv, write_panel_csv
from .supervised import parse_scheme, scheme_slug

log = logging.getLogger("macrocast")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_INTERNAL = 0, 1, 2, 3


def _csv_list(text: str) -> list[str]:
    return [t.strip() for t in text.split(",") if t.strip()]


def _month(text: str) -> MonthStamp:
    try:
        return MonthStamp.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _order(text: str):
    if text == "auto":
        return None
    try:
        order = tuple(int(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"ARIMA order must be p,d,q or auto, got {text!r}") from None
    if len(order) != 3:
        raise argparse.ArgumentTypeError(f"ARIMA order must be p,d,q or auto, got {text!r}")
    return order


def _global_flags(default) -> argparse.ArgumentParser:
    flags = argparse.ArgumentParser(add_help=False)
    flags.add_argument("--seed", type=int, default=default, help="master seed (default 42)")
    flags.add_argument("--out", type=Path, default=default, help="output directory")
    flags.add_argument("--config", type=Path, default=default, help="JSON config file")
    flags.add_argument("-v", "--verbose", action="store_true", default=default if default is not None else False)
    return flags


def build_parser() -> argparse.ArgumentParser:
    # global flags may come before or after the subcommand; the subcommand copy
    # must not reset values given before it
    parser = argparse.ArgumentParser(prog="macrocast", description=__doc__.splitlines()[0],
                                     parents=[_global_flags(None)])
    common = _global_flags(argparse.SUPPRESS)
    parser.add_argument("--version", action="version", version=f"macrocast {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", parents=[common], help="build the canonical panel CSV from FRED downloads")
    p.add_argument("--start", type=_month, help="override panel_start")
    p.add_argument("--end", type=_month, help="override panel_end")

    p = sub.add_parser("summarize", parents=[common], help="per-period min/max/mean/sd of every series")
    p.add_argument("--panel", type=Path, required=True)
    p.add_argument("--end", type=_month, default=MonthStamp(2025, 2),
                   help="last month included in the summaries (default 2025-02)")
    p.add_argument("--figures", action="store_true", help="also draw the series with periods shaded")

    p = sub.add_parser("evaluate", parents=[common], help="fit and score every model under each scheme")
    p.add_argument("--panel", type=Path)
    p.add_argument("--scheme", action="append", dest="schemes",
                   help="80-20, rolling:W-H or fixed:A..B,C..D (repeatable)")
    p.add_argument("--models", type=_csv_list, help=f"comma list from {','.join(MODELS)}")
    p.add_argument("--targets", type=_csv_list, help="comma list of targets (default all three)")
    p.add_argument("--bootstrap-b", type=int, help="bootstrap resamples for the MAE interval")
    p.add_argument("--arima-order", type=_order, help="p,d,q or auto (AIC search)")
    p.add_argument("--trees", type=int, help="random forest size")
    p.add_argument("--jobs", type=int, help="worker processes")
    p.add_argument("--no-markdown", action="store_true")
    p.add_argument("--figures", action="store_true", help="draw PNG figures next to the CSVs")

    p = sub.add_parser("report", parents=[common], help="combine metric tables of a finished run into Markdown")
    p.add_argument("--results", type=Path, required=True)
    p.add_argument("--no-figures", action="store_true")

    p = sub.add_parser("predictions", parents=[common], help="print a prediction trace from a finished run")
    p.add_argument("--results", type=Path, required=True)
    p.add_argument("--scheme", required=True)
    p.add_argument("--target", required=True)
    p.add_argument("--figure", action="store_true", help="also draw it as PNG")
    return parser


def _load_json(path: Path) -> dict:
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigInvalid(f"cannot read config {path}: {exc}") from exc


def cmd_ingest(args) -> int:
    if args.config is None:
        raise ConfigInvalid("ingest needs --config pointing at an ingest JSON file")
    config = IngestConfig.load(args.config)
    if args.start or args.end:
        config = IngestConfig(config.series, args.start or config.panel_start, args.end or config.panel_end)
    panel = ingest(config)
    out = args.out or Path(".")
    out.mkdir(parents=True, exist_ok=True)
    path = write_panel_csv(panel, out / "panel.csv")
    print(f"wrote {path} ({len(panel)} months, {panel.start}..{panel.end})")
    return EXIT_OK


def cmd_summarize(args) -> int:
    panel = read_panel_csv(args.panel)
    end = min(args.end, panel.end)
    panel = panel.slice(panel.start, end)
    periods = [p for p in DEFAULT_PERIODS if p.start <= panel.end and p.end >= panel.start]
    rows = summarize(panel, periods)
    lines = ["variable,period,min,max,mean,sd,n"]
    lines += [f"{r.variable},{r.period},{r.min!r},{r.max!r},{r.mean!r},{r.sd!r},{r.n}" for r in rows]
    text = "\n".join(lines) + "\n"
    if args.out:
        args.out.mkdir(parents=True, exist_ok=True)
        (args.out / "period_summary.csv").write_text(text, encoding="utf-8")
        md = ["| Variable | Statistic | " + " | ".join(p.label for p in periods) + " |",
              "|---|---|" + "---|" * len(periods)]
        by = {(r.variable, r.period): r for r in rows}
        for v in VARIABLES:
            for stat in ("max", "mean", "min", "sd"):
                cells = [f"{getattr(by[(v, p.label)], stat):.2f}" for p in periods]
                md.append(f"| {v} | {stat.capitalize() if stat != 'sd' else 'SD'} | " + " | ".join(cells) + " |")
        (args.out / "period_summary.md").write_text("\n".join(md) + "\n", encoding="utf-8")
        if args.figures:
            from .plotting import plot_panel_periods

            plot_panel_periods(panel, args.out / "targets_by_period.png")
            plot_panel_periods(panel, args.out / "features_by_period.png", variables=VARIABLES[3:])
    sys.stdout.write(text)
    return EXIT_OK


def _run_config(args) -> RunConfig:
    raw = {}
    base = Path(".")
    if args.config is not None:
        raw = _load_json(args.config)
        base = args.config.parent
    overrides = {
        "panel": str(args.panel.resolve()) if args.panel else None,
        "schemes": args.schemes,
        "models": args.models,
        "targets": args.targets,
        "seed": args.seed,
        "out": str(args.out.resolve()) if args.out else None,
        "bootstrap_b": args.bootstrap_b,
        "n_trees": args.trees,
        "jobs": args.jobs,
    }
    raw.update({k: v for k, v in overrides.items() if v is not None})
    if args.arima_order is not None:
        raw["arima_order"] = list(args.arima_order)
    if args.no_markdown:
        raw["markdown"] = False
    if args.figures:
        raw["figures"] = True
    return RunConfig.from_dict(raw, base)


def cmd_evaluate(args) -> int:
    config = _run_config(args)
    result = run(config)
    sys.stdout.write("\n".join(metrics_markdown(sr.label, sr.metric_rows) for sr in result.schemes))
    statuses = [t.status for t in result.tasks]
    log.info("tasks: %d ok, %d missing, %d failed", statuses.count("ok"),
             statuses.count("missing-predictions"), statuses.count("failed"))
    print(f"results written to {config.out_dir}")
    return EXIT_OK


def _read_rows(path: Path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def cmd_report(args) -> int:
    results = args.results
    tables = sorted(results.glob("metrics_*.csv"))
    if not tables:
        raise DataError(f"no metrics_*.csv files in {results}")
    sections = []
    for path in tables:
        rows = _read_rows(path)
        for r in rows:
            for key in ("mae", "mae_ci_low", "mae_ci_high", "rmse", "nrmse"):
                r[key] = float(r[key]) if r[key] else float("nan")
            r["coverage"] = float(r["coverage"])
        sections.append(metrics_markdown(path.stem[len("metrics_"):], rows))
    text = "# Forecast accuracy\n\n" + "\n".join(sections)
    out = args.out or results
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.md").write_text(text, encoding="utf-8")
    if not args.no_figures:
        from .plotting import render_run_figures

        render_run_figures(results)
    sys.stdout.write(text)
    return EXIT_OK


def cmd_predictions(args) -> int:
    slug = scheme_slug(parse_scheme(args.scheme))
    path = args.results / f"predictions_{slug}_{args.target}.csv"
    if not path.exists():
        raise DataError(f"no prediction trace {path.name} in {args.results}")
    sys.stdout.write(path.read_text(encoding="utf-8"))
    if args.figure:
        from .plotting import plot_predictions

        png = plot_predictions(path, (args.out or args.results) / path.with_suffix(".png").name,
                               title=f"{args.target}, {args.scheme}")
        log.info("figure written to %s", png)
    return EXIT_OK


COMMANDS = {
    "ingest": cmd_ingest,
    "summarize": cmd_summarize,
    "evaluate": cmd_evaluate,
    "report": cmd_report,
    "predictions": cmd_predictions,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ConfigInvalid as exc:
        log.error("configuration error: %s", exc)
        return EXIT_CONFIG
    except DataError as exc:
        log.error("data error: %s", exc)
        return EXIT_DATA
    except MacrocastError as exc:
        log.error("%s: %s", type(exc).__name__, exc)
        return EXIT_INTERNAL
    except Exception:
        log.exception("internal failure")
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
