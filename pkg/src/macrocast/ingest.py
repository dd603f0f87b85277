"""Read FRED-style monthly CSV downloads and join them into a balanced Panel.

A run is described by a JSON ingest config::

    {
      "panel_start": "2005-01",
      "panel_end": "2025-02",
      "series": [
        {"role": "target", "name": "EM.T", "path": "CES6562000001.csv", "column": "CES6562000001"},
        ...
      ]
    }

Relative paths are resolved against the config file's directory.
"""

from __future__ import annotations

import csv
import json
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .data_model import FEATURES, TARGETS, VARIABLES, MonthStamp, Panel, Series, month_range
from .errors import (
    ConfigInvalid,
    DuplicateMonth,
    MalformedRow,
    MissingColumn,
    PanelUnreadable,
    UnbalancedPanel,
    WrongSeriesCount,
)

log = logging.getLogger(__name__)

MISSING_MARKERS = (".", "")
PANEL_HEADER = ("month",) + VARIABLES


@dataclass(frozen=True)
class SeriesEntry:
    role: str
    name: str
    path: Path
    column: str


@dataclass(frozen=True)
class IngestConfig:
    series: tuple[SeriesEntry, ...]
    panel_start: MonthStamp = MonthStamp(2005, 1)
    panel_end: MonthStamp = MonthStamp(2025, 2)

    def __post_init__(self):
        targets = sorted(e.name for e in self.series if e.role == "target")
        features = sorted(e.name for e in self.series if e.role == "feature")
        bad_roles = [e.role for e in self.series if e.role not in ("target", "feature")]
        if bad_roles:
            raise ConfigInvalid(f"unknown series role(s): {bad_roles}")
        if targets != sorted(TARGETS) or features != sorted(FEATURES):
            raise ConfigInvalid(
                f"config must name targets {list(TARGETS)} and features {list(FEATURES)}; "
                f"got targets {targets}, features {features}"
            )
        if self.panel_start > self.panel_end:
            raise ConfigInvalid("panel_start is after panel_end")

    @classmethod
    def from_dict(cls, raw: dict, base_dir: Path | str = ".") -> "IngestConfig":
        base_dir = Path(base_dir)
        try:
            entries = tuple(
                SeriesEntry(
                    role=e["role"],
                    name=e["name"],
                    path=(base_dir / e["path"]) if not os.path.isabs(e["path"]) else Path(e["path"]),
                    column=e["column"],
                )
                for e in raw["series"]
            )
            kwargs = {}
            if "panel_start" in raw:
                kwargs["panel_start"] = MonthStamp.parse(raw["panel_start"])
            if "panel_end" in raw:
                kwargs["panel_end"] = MonthStamp.parse(raw["panel_end"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigInvalid(f"bad ingest config: {exc}") from exc
        return cls(entries, **kwargs)

    @classmethod
    def load(cls, path: Path | str) -> "IngestConfig":
        path = Path(path)
        try:
            raw = json.loads(path.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigInvalid(f"cannot read ingest config {path}: {exc}") from exc
        return cls.from_dict(raw, path.parent)

    def to_dict(self) -> dict:
        return {
            "panel_start": str(self.panel_start),
            "panel_end": str(self.panel_end),
            "series": [
                {"role": e.role, "name": e.name, "path": str(e.path), "column": e.column}
                for e in self.series
            ],
        }


def parse_series_csv(path: Path | str, value_column: str, name: str | None = None) -> Series:
    """Parse one FRED download: first column an ISO date, plus a named value column.

    A ``.`` (or empty) value cell is kept as a missing observation and logged.
    """
    path = Path(path)
    name = name or value_column
    with open(path, newline="", encoding="utf-8-sig") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise MissingColumn(f"{path}: file is empty") from None
        if value_column not in header:
            raise MissingColumn(f"{path}: no column {value_column!r} in header {header}")
        vi = header.index(value_column)
        if vi == 0:
            raise MissingColumn(f"{path}: value column {value_column!r} is the date column")

        seen: dict[MonthStamp, float] = {}
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) <= vi:
                raise MalformedRow(f"{path}:{lineno}: expected at least {vi + 1} cells, got {len(row)}")
            try:
                stamp = MonthStamp.parse(row[0])
            except ValueError as exc:
                raise MalformedRow(f"{path}:{lineno}: {exc}") from None
            cell = row[vi].strip()
            if cell in MISSING_MARKERS:
                value = np.nan
            else:
                try:
                    value = float(cell)
                except ValueError:
                    raise MalformedRow(f"{path}:{lineno}: unparseable value {cell!r}") from None
                if not np.isfinite(value):
                    raise MalformedRow(f"{path}:{lineno}: non-finite value {cell!r}")
            if stamp in seen:
                raise DuplicateMonth(f"{path}:{lineno}: month {stamp} appears twice")
            seen[stamp] = value

    stamps = sorted(seen)
    series = Series(name, tuple(stamps), np.array([seen[s] for s in stamps], dtype=np.float64))
    missing = series.missing_months()
    if missing:
        log.warning("%s: %d missing value(s): %s", name, len(missing), ", ".join(map(str, missing)))
    return series


def parse_all(config: IngestConfig, workers: int = 4) -> list[Series]:
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda e: parse_series_csv(e.path, e.column, e.name), config.series))


def assemble_panel(config: IngestConfig, series: Sequence[Series]) -> Panel:
    """Align every series to the configured window, or report all holes at once."""
    names = [s.name for s in series]
    if len(series) != len(VARIABLES) or sorted(names) != sorted(VARIABLES):
        raise WrongSeriesCount(
            f"expected the {len(VARIABLES)} series {list(VARIABLES)}, got {len(series)}: {names}"
        )
    by_name = {s.name: s for s in series}
    window = month_range(config.panel_start, config.panel_end)
    lo, hi = config.panel_start.ordinal, config.panel_end.ordinal

    holes = []
    data = {}
    for name in VARIABLES:
        s = by_name[name]
        col = np.full(len(window), np.nan)
        for stamp, value in zip(s.stamps, s.values):
            if lo <= stamp.ordinal <= hi:
                col[stamp.ordinal - lo] = value
        holes.extend((name, str(window[i])) for i in np.flatnonzero(np.isnan(col)))
        data[name] = col
    if holes:
        raise UnbalancedPanel(holes)
    return Panel(config.panel_start, config.panel_end, data)


def ingest(config: IngestConfig) -> Panel:
    return assemble_panel(config, parse_all(config))


def _atomic_write_text(path: Path, text: str) -> None:
    tmp = path.with_name(f".{path.name}.tmp")
    with open(tmp, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)


def panel_to_csv_text(panel: Panel) -> str:
    lines = [",".join(PANEL_HEADER)]
    cols = [panel.column(v) for v in VARIABLES]
    for i, month in enumerate(panel.months):
        lines.append(",".join([str(month)] + [repr(float(c[i])) for c in cols]))
    return "\n".join(lines) + "\n"


def write_panel_csv(panel: Panel, path: Path | str) -> Path:
    path = Path(path)
    _atomic_write_text(path, panel_to_csv_text(panel))
    return path


def read_panel_csv(path: Path | str) -> Panel:
    """Read the canonical ``month,EM.T,...,IT.F`` panel file."""
    path = Path(path)
    try:
        with open(path, newline="", encoding="utf-8-sig") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise PanelUnreadable(f"cannot read panel {path}: {exc}") from exc
    if not rows:
        raise PanelUnreadable(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    if header[0] != "month" or sorted(header[1:]) != sorted(VARIABLES):
        raise PanelUnreadable(f"{path}: header must be {','.join(PANEL_HEADER)}, got {header}")
    body = [r for r in rows[1:] if r and any(c.strip() for c in r)]
    if not body:
        raise PanelUnreadable(f"{path}: no data rows")
    try:
        months = [MonthStamp.parse(r[0]) for r in body]
        values = np.array([[float(c) for c in r[1:]] for r in body], dtype=np.float64)
    except (ValueError, IndexError) as exc:
        raise PanelUnreadable(f"{path}: {exc}") from exc
    if values.shape[1] != len(VARIABLES):
        raise PanelUnreadable(f"{path}: ragged rows")
    if any(b.ordinal - a.ordinal != 1 for a, b in zip(months, months[1:])):
        raise PanelUnreadable(f"{path}: months are not consecutive")
    if not np.all(np.isfinite(values)):
        raise PanelUnreadable(f"{path}: panel contains missing values")
    data = {name: values[:, j] for j, name in enumerate(header[1:])}
    return Panel(months[0], months[-1], data)


def write_series_csvs(panel: Panel, directory: Path | str) -> IngestConfig:
    """Split a panel back into one FRED-style file per series; returns a matching config."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    entries = []
    for name in VARIABLES:
        column = name.replace(".", "_")
        path = directory / f"{column}.csv"
        lines = [f"observation_date,{column}"]
        lines += [f"{m.year:04d}-{m.month:02d}-01,{float(v)!r}" for m, v in zip(panel.months, panel.column(name))]
        _atomic_write_text(path, "\n".join(lines) + "\n")
        entries.append(SeriesEntry("target" if name in TARGETS else "feature", name, path, column))
    return IngestConfig(tuple(entries), panel.start, panel.end)
