"""Run every (target, model, scheme, fold) task and write tables plus a manifest.

Every task gets a seed derived from a hash of (master seed, target, model,
scheme, fold), so a task's output never depends on which other tasks are in
the run or on the order the work pool finishes them.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__, arimax, gam, mlp
from .data_model import TARGETS
from .errors import (
    ConfigInvalid,
    MetricError,
    MinimumRows,
    ModelError,
    NoPredictions,
    OutputUnwritable,
    TrainingTooShort,
)
from .forest import ForestConfig, fit_forest
from .ingest import panel_to_csv_text, read_panel_csv
from .metrics import DEFAULT_BOOTSTRAP, PredictionSet, compute_metrics, pool
from .supervised import build_lagged, fit_standardizer, folds, parse_scheme, scheme_slug

log = logging.getLogger(__name__)

MODELS = ("sgd", "adam", "lbfgs", "gam", "arima", "rf")
MODEL_LABELS = {
    "sgd": "SGD",
    "adam": "Adam",
    "lbfgs": "L-BFGS",
    "gam": "GAM",
    "arima": "ARIMA",
    "rf": "Random Forest",
}
NEURAL = ("sgd", "adam", "lbfgs")
# too little training data: expected, reported as missing predictions
INSUFFICIENT = (TrainingTooShort, MinimumRows)

METRIC_COLUMNS = ("target", "model", "mae", "mae_ci_low", "mae_ci_high", "rmse", "nrmse", "coverage", "note")
FOLD_COLUMNS = (
    "target", "model", "fold", "train_start", "train_end", "test_start", "test_end",
    "n_test", "n_evaluated", "mae", "rmse", "nrmse", "status", "reason",
)


@dataclass
class RunConfig:
    panel_path: Path
    schemes: tuple = ("80-20",)
    models: tuple = MODELS
    targets: tuple = TARGETS
    seed: int = 42
    out_dir: Path = Path("results")
    bootstrap_b: int = DEFAULT_BOOTSTRAP
    arima_order: Optional[tuple] = None  # None -> AIC selection
    n_trees: int = 500
    jobs: int = 1
    markdown: bool = True
    figures: bool = False

    def __post_init__(self):
        self.panel_path = Path(self.panel_path)
        self.out_dir = Path(self.out_dir)
        self.schemes = tuple(self.schemes)
        self.models = tuple(self.models)
        self.targets = tuple(self.targets)
        if not self.schemes or not self.models or not self.targets:
            raise ConfigInvalid("schemes, models and targets must all be non-empty")
        for s in self.schemes:
            parse_scheme(s)
        if len(set(parse_scheme(s).label for s in self.schemes)) != len(self.schemes):
            raise ConfigInvalid("duplicate scheme")
        bad = [m for m in self.models if m not in MODELS]
        if bad or len(set(self.models)) != len(self.models):
            raise ConfigInvalid(f"models must be distinct names from {list(MODELS)}; got {list(self.models)}")
        bad = [t for t in self.targets if t not in TARGETS]
        if bad or len(set(self.targets)) != len(self.targets):
            raise ConfigInvalid(f"targets must be distinct names from {list(TARGETS)}; got {list(self.targets)}")
        if self.bootstrap_b < 1 or self.n_trees < 1 or self.jobs < 1:
            raise ConfigInvalid("bootstrap_b, n_trees and jobs must be >= 1")
        if self.arima_order is not None:
            order = tuple(int(v) for v in self.arima_order)
            if len(order) != 3 or min(order) < 0:
                raise ConfigInvalid(f"ARIMA order must be three non-negative integers, got {self.arima_order}")
            self.arima_order = order

    @classmethod
    def from_dict(cls, raw: dict, base_dir: Path | str = ".") -> "RunConfig":
        known = {
            "panel": "panel_path", "schemes": "schemes", "models": "models", "targets": "targets",
            "seed": "seed", "out": "out_dir", "bootstrap_b": "bootstrap_b", "arima_order": "arima_order",
            "n_trees": "n_trees", "jobs": "jobs", "markdown": "markdown", "figures": "figures",
        }
        unknown = set(raw) - set(known)
        if unknown:
            raise ConfigInvalid(f"unknown run config keys: {sorted(unknown)}")
        kwargs = {known[k]: v for k, v in raw.items()}
        if kwargs.get("arima_order") == "auto":
            kwargs["arima_order"] = None
        for key in ("panel_path", "out_dir"):
            if key in kwargs and not os.path.isabs(kwargs[key]):
                kwargs[key] = Path(base_dir) / kwargs[key]
        if "panel_path" not in kwargs:
            raise ConfigInvalid("run config needs a 'panel' path")
        try:
            return cls(**kwargs)
        except TypeError as exc:
            raise ConfigInvalid(str(exc)) from exc

    def to_dict(self) -> dict:
        return {
            "panel": str(self.panel_path),
            "schemes": list(self.schemes),
            "models": list(self.models),
            "targets": list(self.targets),
            "seed": self.seed,
            "out": str(self.out_dir),
            "bootstrap_b": self.bootstrap_b,
            "arima_order": list(self.arima_order) if self.arima_order else "auto",
            "n_trees": self.n_trees,
            "jobs": self.jobs,
            "markdown": self.markdown,
            "figures": self.figures,
        }


def derive_seed(master: int, *parts) -> int:
    key = "|".join([str(master)] + [str(p) for p in parts]).encode()
    return int.from_bytes(hashlib.sha256(key).digest()[:8], "big") & (2**63 - 1)


@dataclass(frozen=True)
class ModelOptions:
    arima_order: Optional[tuple] = None
    n_trees: int = 500


def fit_predict(model: str, X_train, y_train, X_test, seed: int, options: ModelOptions = ModelOptions()):
    """Fit ``model`` on the training rows only and predict the test rows in original units."""
    if model in NEURAL:
        xs = fit_standardizer(X_train)
        ys = fit_standardizer(y_train)
        fitted = mlp.fit(xs.apply(X_train), ys.apply(y_train), model, seed=seed)
        return ys.invert(fitted.predict(xs.apply(X_test))), fitted
    if model == "gam":
        fitted = gam.fit_gam(X_train, y_train)
        return fitted.predict(X_test), fitted
    if model == "arima":
        fitted = arimax.fit_arimax(X_train, y_train, options.arima_order or "auto")
        return arimax.forecast_arimax(fitted, X_test, len(X_test)), fitted
    if model == "rf":
        fitted = fit_forest(X_train, y_train, ForestConfig(n_trees=options.n_trees, seed=seed))
        return fitted.predict(X_test), fitted
    raise ConfigInvalid(f"unknown model {model!r}")


@dataclass
class Task:
    target: str
    model: str
    scheme: str
    fold: int
    seed: int
    train: range
    test: range
    X_train: np.ndarray
    y_train: np.ndarray
    X_test: np.ndarray
    options: ModelOptions


@dataclass
class TaskResult:
    target: str
    model: str
    scheme: str
    fold: int
    seed: int
    status: str
    reason: str
    message: str
    predictions: np.ndarray
    seconds: float


def execute(task: Task) -> TaskResult:
    start = time.perf_counter()
    n_test = len(task.test)
    status, reason, message = "ok", "", ""
    try:
        pred, _ = fit_predict(task.model, task.X_train, task.y_train, task.X_test, task.seed, task.options)
        pred = np.asarray(pred, dtype=np.float64)
        if not np.all(np.isfinite(pred)):
            status, reason, message = "failed", "NonFinitePrediction", "model produced non-finite forecasts"
            pred = np.full(n_test, np.nan)
    except INSUFFICIENT as exc:
        status, reason, message = "missing-predictions", type(exc).__name__, str(exc)
        pred = np.full(n_test, np.nan)
    except (ModelError, np.linalg.LinAlgError, FloatingPointError) as exc:
        status, reason, message = "failed", type(exc).__name__, str(exc)
        pred = np.full(n_test, np.nan)
    return TaskResult(
        task.target, task.model, task.scheme, task.fold, task.seed, status, reason, message,
        pred, time.perf_counter() - start,
    )


@dataclass
class SchemeResult:
    label: str
    slug: str
    metric_rows: list = field(default_factory=list)
    fold_rows: list = field(default_factory=list)
    # target -> (stamps, observed, {model: predictions})
    traces: dict = field(default_factory=dict)


@dataclass
class RunResult:
    config: RunConfig
    panel_sha256: str
    schemes: list
    tasks: list
    outputs: dict = field(default_factory=dict)


def _fmt(value) -> str:
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _summarize_reasons(results) -> str:
    reasons = sorted({r.reason for r in results if r.reason})
    return ";".join(reasons)


def _metric_row(target, model, ps: PredictionSet, results, bootstrap_b, seed) -> dict:
    row = {"target": target, "model": model, "coverage": 0.0, "note": _summarize_reasons(results)}
    try:
        rep = compute_metrics(ps, bootstrap_b, seed)
    except NoPredictions:
        return row
    except MetricError as exc:
        row["coverage"] = float(ps.evaluated.mean())
        row["note"] = ";".join(filter(None, [row["note"], type(exc).__name__]))
        return row
    row.update(
        mae=rep.mae, mae_ci_low=rep.mae_ci_low, mae_ci_high=rep.mae_ci_high,
        rmse=rep.rmse, nrmse=rep.nrmse, coverage=rep.coverage,
    )
    return row


def run(config: RunConfig, write: bool = True) -> RunResult:
    panel = read_panel_csv(config.panel_path)
    panel_text = panel_to_csv_text(panel)
    panel_hash = hashlib.sha256(panel_text.encode()).hexdigest()
    options = ModelOptions(config.arima_order, config.n_trees)

    tasks: list[Task] = []
    layout = []  # (scheme label, slug, target, dataset, folds)
    for spelled in config.schemes:
        scheme = parse_scheme(spelled)
        for target in config.targets:
            ds = build_lagged(panel, target)
            fs = folds(ds, scheme)
            layout.append((scheme.label, scheme_slug(scheme), target, ds, fs))
            for model in config.models:
                for f in fs:
                    tasks.append(Task(
                        target, model, scheme.label, f.index,
                        derive_seed(config.seed, target, model, scheme.label, f.index),
                        f.train, f.test,
                        ds.X[f.train.start:f.train.stop], ds.y[f.train.start:f.train.stop],
                        ds.X[f.test.start:f.test.stop], options,
                    ))

    if config.jobs > 1:
        with ProcessPoolExecutor(max_workers=config.jobs) as ex:
            results = list(ex.map(execute, tasks, chunksize=max(1, len(tasks) // (8 * config.jobs))))
    else:
        results = [execute(t) for t in tasks]
    by_key = {(r.scheme, r.target, r.model, r.fold): r for r in results}

    schemes: dict[str, SchemeResult] = {}
    for label, slug, target, ds, fs in layout:
        sr = schemes.setdefault(label, SchemeResult(label, slug))
        test_idx = np.concatenate([np.arange(f.test.start, f.test.stop) for f in fs])
        stamps = tuple(ds.stamps[i] for i in test_idx)
        observed = ds.y[test_idx]
        trace = {}
        for model in config.models:
            fold_results = [by_key[(label, target, model, f.index)] for f in fs]
            sets = []
            for f, r in zip(fs, fold_results):
                ps = PredictionSet(tuple(ds.stamps[f.test.start:f.test.stop]), ds.y[f.test.start:f.test.stop], r.predictions)
                sets.append(ps)
                fold_row = {
                    "target": target, "model": model, "fold": f.index,
                    "train_start": str(ds.stamps[f.train.start]), "train_end": str(ds.stamps[f.train.stop - 1]),
                    "test_start": str(ds.stamps[f.test.start]), "test_end": str(ds.stamps[f.test.stop - 1]),
                    "n_test": len(f.test), "n_evaluated": int(ps.evaluated.sum()),
                    "status": r.status, "reason": r.reason,
                }
                if ps.evaluated.any():
                    err = ps.observed[ps.evaluated] - ps.predicted[ps.evaluated]
                    fold_row["mae"] = float(np.mean(np.abs(err)))
                    fold_row["rmse"] = math.sqrt(float(np.mean(err * err)))
                    y_bar = float(np.mean(ps.observed[ps.evaluated]))
                    if y_bar > 0:
                        fold_row["nrmse"] = fold_row["rmse"] / y_bar
                sr.fold_rows.append(fold_row)
            pooled = pool(sets)
            trace[model] = pooled.predicted
            sr.metric_rows.append(_metric_row(
                target, model, pooled, fold_results, config.bootstrap_b,
                derive_seed(config.seed, target, model, label, "bootstrap"),
            ))
        sr.traces[target] = (stamps, observed, trace)

    result = RunResult(config, panel_hash, list(schemes.values()), results)
    if write:
        emit_reports(result, config.out_dir, markdown=config.markdown, figures=config.figures)
    return result


def _csv_text(columns, rows) -> str:
    lines = [",".join(columns)]
    for row in rows:
        lines.append(",".join(_fmt(row.get(c)) for c in columns))
    return "\n".join(lines) + "\n"


def metrics_csv_text(sr: SchemeResult) -> str:
    return _csv_text(METRIC_COLUMNS, sr.metric_rows)


def predictions_csv_text(stamps, observed, trace: dict) -> str:
    models = list(trace)
    lines = [",".join(["month", "observed"] + models)]
    for i, stamp in enumerate(stamps):
        cells = [str(stamp), repr(float(observed[i]))] + [_fmt(float(trace[m][i])) for m in models]
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def format_mae_cell(mae, lo, hi) -> str:
    return f"{mae:.2f} ({lo:.2f}, {hi:.2f})"


def metrics_markdown(label: str, rows) -> str:
    out = [
        f"### {label}",
        "",
        "| Target | Model | MAE (95% CI) | RMSE | N-RMSE | Coverage |",
        "|---|---|---|---|---|---|",
    ]
    for row in rows:
        model = MODEL_LABELS.get(row["model"], row["model"])
        if isinstance(row.get("mae"), float) and not math.isnan(row["mae"]):
            mae = format_mae_cell(row["mae"], row["mae_ci_low"], row["mae_ci_high"])
            rmse = f"{row['rmse']:.2f}"
            nrmse = f"{row['nrmse']:.3f}"
        else:
            note = row.get("note") or "no predictions"
            mae, rmse, nrmse = f"n/a ({note})", "n/a", "n/a"
        out.append(f"| {row['target']} | {model} | {mae} | {rmse} | {nrmse} | {float(row['coverage']):.2f} |")
    return "\n".join(out) + "\n"


def _atomic_write(path: Path, text: str) -> str:
    tmp = path.with_name(f".{path.name}.tmp")
    data = text.encode("utf-8")
    with open(tmp, "wb") as fh:
        fh.write(data)
    os.replace(tmp, path)
    return hashlib.sha256(data).hexdigest()


def emit_reports(result: RunResult, out_dir: Path | str, markdown: bool = True, figures: bool = False) -> dict:
    """Write metric tables, per-fold diagnostics, prediction traces and the manifest.

    Returns a mapping of written file name to SHA-256.
    """
    if not result.schemes or not any(sr.metric_rows for sr in result.schemes):
        raise NoPredictions("run produced no results; nothing written")
    out_dir = Path(out_dir)
    files: dict[str, str] = {}
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        for sr in result.schemes:
            files[f"metrics_{sr.slug}.csv"] = metrics_csv_text(sr)
            files[f"fold_metrics_{sr.slug}.csv"] = _csv_text(FOLD_COLUMNS, sr.fold_rows)
            for target, (stamps, observed, trace) in sr.traces.items():
                files[f"predictions_{sr.slug}_{target}.csv"] = predictions_csv_text(stamps, observed, trace)
            if markdown:
                files[f"metrics_{sr.slug}.md"] = metrics_markdown(sr.label, sr.metric_rows)
        hashes = {name: _atomic_write(out_dir / name, text) for name, text in sorted(files.items())}
    except OSError as exc:
        raise OutputUnwritable(f"cannot write results to {out_dir}: {exc}") from exc

    result.outputs = hashes
    manifest = build_manifest(result)
    try:
        _atomic_write(out_dir / "manifest.json", json.dumps(manifest, indent=2) + "\n")
    except OSError as exc:
        raise OutputUnwritable(f"cannot write manifest to {out_dir}: {exc}") from exc
    if figures:
        from .plotting import render_run_figures

        render_run_figures(out_dir)
    return hashes


def build_manifest(result: RunResult) -> dict:
    model_rank = {m: i for i, m in enumerate(result.config.models)}
    target_rank = {t: i for i, t in enumerate(result.config.targets)}
    scheme_rank = {parse_scheme(s).label: i for i, s in enumerate(result.config.schemes)}
    tasks = sorted(
        result.tasks,
        key=lambda r: (scheme_rank[r.scheme], target_rank[r.target], model_rank[r.model], r.fold),
    )
    results_hash = hashlib.sha256(
        json.dumps(sorted(result.outputs.items())).encode()
    ).hexdigest()
    return {
        "software": {"name": "macrocast", "version": __version__},
        "config": result.config.to_dict(),
        "panel_sha256": result.panel_sha256,
        "results_sha256": results_hash,
        "outputs": dict(sorted(result.outputs.items())),
        "tasks": [
            {
                "target": r.target, "model": r.model, "scheme": r.scheme, "fold": r.fold,
                "seed": r.seed, "status": r.status, "reason": r.reason,
                "message": r.message, "seconds": round(r.seconds, 6),
            }
            for r in tasks
        ],
    }
