"""Calendar-aware monthly series, the balanced panel, and period summaries."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import EmptyPeriod, RangeOutOfBounds

TARGETS = ("EM.T", "BA.T", "CTS.T")
FEATURES = ("BA.F", "IN.F", "CTS.F", "CNS.F", "MN.F", "IT.F")
VARIABLES = TARGETS + FEATURES

_MONTH_RE = re.compile(r"^(\d{4})-(\d{2})(?:-(\d{2}))?$")


@dataclass(frozen=True, order=True)
class MonthStamp:
    year: int
    month: int

    def __post_init__(self):
        if not isinstance(self.year, (int, np.integer)) or self.year < 1900:
            raise ValueError(f"year must be an integer >= 1900, got {self.year!r}")
        if not isinstance(self.month, (int, np.integer)) or not 1 <= self.month <= 12:
            raise ValueError(f"month must be in 1..12, got {self.month!r}")

    @classmethod
    def parse(cls, text: str) -> "MonthStamp":
        """Parse ``YYYY-MM`` or ``YYYY-MM-01``; other days of month are rejected."""
        m = _MONTH_RE.match(text.strip())
        if not m:
            raise ValueError(f"not a month stamp: {text!r}")
        if m.group(3) is not None and m.group(3) != "01":
            raise ValueError(f"date {text!r} is not on the first of the month")
        return cls(int(m.group(1)), int(m.group(2)))

    @classmethod
    def from_ordinal(cls, ordinal: int) -> "MonthStamp":
        return cls(ordinal // 12, ordinal % 12 + 1)

    @property
    def ordinal(self) -> int:
        return self.year * 12 + self.month - 1

    def shift(self, months: int) -> "MonthStamp":
        return MonthStamp.from_ordinal(self.ordinal + months)

    def successor(self) -> "MonthStamp":
        return self.shift(1)

    def __str__(self):
        return f"{self.year:04d}-{self.month:02d}"


def months_between(start: MonthStamp, end: MonthStamp) -> int:
    return end.ordinal - start.ordinal


def month_range(start: MonthStamp, end: MonthStamp) -> list[MonthStamp]:
    """Every month from start to end, endpoints inclusive."""
    return [MonthStamp.from_ordinal(k) for k in range(start.ordinal, end.ordinal + 1)]


@dataclass(frozen=True)
class Series:
    """A named monthly series.

    Missing observations (FRED's ``.`` marker) are stored as NaN so they can
    be reported; a balanced panel never contains any.
    """

    name: str
    stamps: tuple[MonthStamp, ...]
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64)
        if values.shape != (len(self.stamps),):
            raise ValueError("stamps and values differ in length")
        for a, b in zip(self.stamps, self.stamps[1:]):
            if not a < b:
                raise ValueError(f"series {self.name}: stamps not strictly increasing at {b}")
        values.setflags(write=False)
        object.__setattr__(self, "stamps", tuple(self.stamps))
        object.__setattr__(self, "values", values)

    def __len__(self):
        return len(self.stamps)

    @property
    def start(self) -> MonthStamp:
        return self.stamps[0]

    @property
    def end(self) -> MonthStamp:
        return self.stamps[-1]

    def missing_months(self) -> list[MonthStamp]:
        return [s for s, v in zip(self.stamps, self.values) if np.isnan(v)]

    def is_consecutive(self) -> bool:
        return all(b.ordinal - a.ordinal == 1 for a, b in zip(self.stamps, self.stamps[1:]))


def slice_series(series: Series, start: MonthStamp, end: MonthStamp) -> Series:
    if start > end:
        raise RangeOutOfBounds(f"slice start {start} is after end {end}")
    if not series.stamps:
        raise RangeOutOfBounds(f"series {series.name} is empty")
    for endpoint in (start, end):
        if endpoint < series.start or endpoint > series.end:
            raise RangeOutOfBounds(
                f"{endpoint} outside series {series.name} range {series.start}..{series.end}"
            )
    keep = [i for i, s in enumerate(series.stamps) if start <= s <= end]
    return Series(series.name, tuple(series.stamps[i] for i in keep), series.values[keep])


@dataclass(frozen=True)
class Panel:
    """Nine aligned series over a shared, gapless [start, end] window."""

    start: MonthStamp
    end: MonthStamp
    data: dict[str, np.ndarray] = field(repr=False)

    def __post_init__(self):
        n = months_between(self.start, self.end) + 1
        if n < 1:
            raise ValueError("panel end precedes start")
        frozen = {}
        for name in VARIABLES:
            if name not in self.data:
                raise ValueError(f"panel lacks series {name}")
            col = np.array(self.data[name], dtype=np.float64)
            if col.shape != (n,):
                raise ValueError(f"series {name} has {col.shape[0]} values, expected {n}")
            if not np.all(np.isfinite(col)):
                raise ValueError(f"series {name} contains missing or non-finite values")
            col.setflags(write=False)
            frozen[name] = col
        extra = set(self.data) - set(VARIABLES)
        if extra:
            raise ValueError(f"unknown series in panel: {sorted(extra)}")
        object.__setattr__(self, "data", frozen)

    def __len__(self):
        return months_between(self.start, self.end) + 1

    @property
    def months(self) -> list[MonthStamp]:
        return month_range(self.start, self.end)

    def column(self, name: str) -> np.ndarray:
        return self.data[name]

    def series(self, name: str) -> Series:
        return Series(name, tuple(self.months), self.data[name])

    def feature_matrix(self) -> np.ndarray:
        return np.column_stack([self.data[f] for f in FEATURES])

    def slice(self, start: MonthStamp, end: MonthStamp) -> "Panel":
        if start > end or start < self.start or end > self.end:
            raise RangeOutOfBounds(f"{start}..{end} not inside panel {self.start}..{self.end}")
        i0 = months_between(self.start, start)
        i1 = months_between(self.start, end) + 1
        return Panel(start, end, {k: v[i0:i1] for k, v in self.data.items()})


@dataclass(frozen=True)
class PeriodDefinition:
    label: str
    start: MonthStamp
    end: MonthStamp
    description: str = ""


DEFAULT_PERIODS = (
    PeriodDefinition("P1", MonthStamp(2008, 6), MonthStamp(2009, 6), "Great Recession"),
    PeriodDefinition("P2", MonthStamp(2009, 7), MonthStamp(2015, 12), "Post-recession recovery"),
    PeriodDefinition("P3", MonthStamp(2016, 1), MonthStamp(2020, 2), "Pre-pandemic growth"),
    PeriodDefinition("P4", MonthStamp(2020, 3), MonthStamp(2023, 5), "COVID-19 pandemic"),
    PeriodDefinition("P5", MonthStamp(2023, 6), MonthStamp(2025, 1), "Post-pandemic recovery"),
)


@dataclass(frozen=True)
class PeriodSummary:
    variable: str
    period: str
    min: float
    max: float
    mean: float
    sd: float
    n: int


def summarize(
    panel: Panel,
    periods: Sequence[PeriodDefinition] = DEFAULT_PERIODS,
    variables: Iterable[str] = VARIABLES,
) -> list[PeriodSummary]:
    """Min/max/mean/sample-sd of each variable within each period (endpoints inclusive).

    Periods that only partly overlap the panel are summarized over the overlap.
    """
    months = np.array([m.ordinal for m in panel.months])
    masks = []
    for period in periods:
        mask = (months >= period.start.ordinal) & (months <= period.end.ordinal)
        if not mask.any():
            raise EmptyPeriod(
                f"period {period.label} ({period.start}..{period.end}) has no months "
                f"inside panel {panel.start}..{panel.end}"
            )
        masks.append(mask)

    out = []
    for name in variables:
        col = panel.column(name)
        for period, mask in zip(periods, masks):
            x = col[mask]
            sd = float(np.std(x, ddof=1)) if x.size > 1 else 0.0
            mean = float(np.mean(x))
            lo, hi = float(np.min(x)), float(np.max(x))
            # float summation can push the mean a hair past an extreme for constant data
            mean = min(max(mean, lo), hi)
            out.append(PeriodSummary(name, period.label, lo, hi, mean, sd, int(x.size)))
    return out
