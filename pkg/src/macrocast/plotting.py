"""Matplotlib renderings of the run outputs.

Figures are drawn from the CSV files a run writes, so ``macrocast report``
can redraw them without re-running any model.  PNGs are written next to the
CSVs and are not part of the hashed outputs.
"""

from __future__ import annotations

import csv
import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .data_model import DEFAULT_PERIODS, TARGETS, Panel  # noqa: E402
from .harness import MODEL_LABELS  # noqa: E402

plt.rcParams.update({
    "figure.dpi": 100,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "axes.labelsize": 10,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
})


def _read_csv(path: Path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def _num(cell: str) -> float:
    return float(cell) if cell not in ("", None) else math.nan


def _month_axis(months):
    # fractional years keep the axis numeric without date parsing
    return [int(m[:4]) + (int(m[5:7]) - 1) / 12 for m in months]


def plot_predictions(csv_path: Path | str, png_path: Path | str | None = None, title: str | None = None) -> Path:
    """Observed target against every model's predictions, one line per model."""
    csv_path = Path(csv_path)
    rows = _read_csv(csv_path)
    if not rows:
        raise ValueError(f"{csv_path} has no data rows")
    models = [c for c in rows[0] if c not in ("month", "observed")]
    x = _month_axis([r["month"] for r in rows])

    fig, ax = plt.subplots(figsize=(8, 4))
    ax.plot(x, [_num(r["observed"]) for r in rows], color="black", lw=2, label="Observed")
    for model in models:
        ax.plot(x, [_num(r[model]) for r in rows], lw=1, label=MODEL_LABELS.get(model, model))
    ax.set_xlabel("Month")
    ax.set_ylabel("Value")
    ax.set_title(title or csv_path.stem)
    ax.legend(ncol=2, frameon=False)
    fig.tight_layout()
    png_path = Path(png_path) if png_path else csv_path.with_suffix(".png")
    fig.savefig(png_path)
    plt.close(fig)
    return png_path


def plot_nrmse(csv_path: Path | str, png_path: Path | str | None = None) -> Path:
    """Grouped bars of N-RMSE per target and model from a metrics table."""
    csv_path = Path(csv_path)
    rows = _read_csv(csv_path)
    targets = list(dict.fromkeys(r["target"] for r in rows))
    models = list(dict.fromkeys(r["model"] for r in rows))
    values = {(r["target"], r["model"]): _num(r["nrmse"]) for r in rows}
    width = 0.8 / max(1, len(models))

    fig, ax = plt.subplots(figsize=(7, 3.5))
    for j, model in enumerate(models):
        xs = [i + j * width for i in range(len(targets))]
        ax.bar(xs, [values.get((t, model), math.nan) for t in targets], width, label=MODEL_LABELS.get(model, model))
    ax.set_xticks([i + 0.4 - width / 2 for i in range(len(targets))])
    ax.set_xticklabels(targets)
    ax.set_ylabel("N-RMSE")
    ax.set_title(csv_path.stem)
    ax.legend(ncol=3, frameon=False)
    fig.tight_layout()
    png_path = Path(png_path) if png_path else csv_path.with_suffix(".png")
    fig.savefig(png_path)
    plt.close(fig)
    return png_path


def plot_panel_periods(panel: Panel, png_path: Path | str, variables=TARGETS, periods=DEFAULT_PERIODS) -> Path:
    """Each variable over time with the socioeconomic periods shaded."""
    x = _month_axis([str(m) for m in panel.months])
    fig, axes = plt.subplots(len(variables), 1, figsize=(8, 2.2 * len(variables)), sharex=True, squeeze=False)
    for ax, name in zip(axes[:, 0], variables):
        ax.plot(x, panel.column(name), color="black", lw=1)
        for k, period in enumerate(periods):
            a = period.start.year + (period.start.month - 1) / 12
            b = period.end.year + period.end.month / 12
            ax.axvspan(a, b, color=f"C{k}", alpha=0.12, lw=0)
            ax.text((a + b) / 2, 1.0, period.label, transform=ax.get_xaxis_transform(),
                    ha="center", va="bottom", fontsize=7)
        ax.set_ylabel(name)
    axes[-1, 0].set_xlabel("Month")
    fig.tight_layout()
    png_path = Path(png_path)
    fig.savefig(png_path)
    plt.close(fig)
    return png_path


def render_run_figures(out_dir: Path | str) -> list[Path]:
    out_dir = Path(out_dir)
    written = []
    for path in sorted(out_dir.glob("predictions_*.csv")):
        written.append(plot_predictions(path))
    for path in sorted(out_dir.glob("metrics_*.csv")):
        written.append(plot_nrmse(path))
    return written
