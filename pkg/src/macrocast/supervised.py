"""One-month-lag supervised datasets, evaluation folds, and per-window scaling."""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Union

import numpy as np

from .data_model import FEATURES, TARGETS, MonthStamp, Panel
from .errors import ConfigInvalid, DatasetTooShort, DegenerateColumn, PanelTooShort


@dataclass(frozen=True)
class SupervisedDataset:
    """Row i pairs features observed at month t-1 with the target at month t = stamps[i]."""

    target_name: str
    stamps: tuple[MonthStamp, ...]
    X: np.ndarray
    y: np.ndarray
    feature_names: tuple[str, ...] = FEATURES

    def __len__(self):
        return len(self.stamps)

    def rows(self, index: range):
        return self.X[index.start:index.stop], self.y[index.start:index.stop]


def build_lagged(panel: Panel, target_name: str) -> SupervisedDataset:
    if target_name not in TARGETS:
        raise ValueError(f"unknown target {target_name!r}")
    n = len(panel)
    if n < 2:
        raise PanelTooShort(f"panel has {n} month(s); lagging needs at least 2")
    X = panel.feature_matrix()[:-1].copy()
    y = panel.column(target_name)[1:].copy()
    X.setflags(write=False)
    y.setflags(write=False)
    return SupervisedDataset(target_name, tuple(panel.months[1:]), X, y)


@dataclass(frozen=True)
class FixedSplit:
    train_start: MonthStamp
    train_end: MonthStamp
    test_start: MonthStamp
    test_end: MonthStamp

    def __post_init__(self):
        if self.train_end.successor() != self.test_start:
            raise ConfigInvalid("test window must start the month after training ends")
        if self.train_start > self.train_end or self.test_start > self.test_end:
            raise ConfigInvalid("split window endpoints are out of order")

    @property
    def label(self) -> str:
        return f"fixed:{self.train_start}..{self.train_end},{self.test_start}..{self.test_end}"


@dataclass(frozen=True)
class ProportionalSplit:
    """Train on the first floor(fraction * n) rows and test on the rest.

    On the default 241-row dataset (2005-02..2025-02) with fraction 0.8 this
    resolves to exactly train 2005-02..2021-01 / test 2021-02..2025-02.
    """

    train_fraction: float = 0.8
    label: str = "80-20"

    def __post_init__(self):
        if not 0 < self.train_fraction < 1:
            raise ConfigInvalid("train fraction must lie in (0, 1)")

    def resolve(self, dataset: SupervisedDataset) -> FixedSplit:
        n = len(dataset)
        n_train = int(np.floor(self.train_fraction * n + 1e-9))
        if n_train < 1 or n_train >= n:
            raise DatasetTooShort(f"{n} rows cannot be split {self.label}")
        s = dataset.stamps
        return FixedSplit(s[0], s[n_train - 1], s[n_train], s[-1])


@dataclass(frozen=True)
class Rolling:
    window_months: int
    horizon_months: int

    def __post_init__(self):
        if self.window_months < 1 or self.horizon_months < 1:
            raise ConfigInvalid("rolling window and horizon must both be >= 1")

    @property
    def label(self) -> str:
        return f"rolling:{self.window_months}-{self.horizon_months}"


EvaluationScheme = Union[FixedSplit, ProportionalSplit, Rolling]

DEFAULT_SPLIT = FixedSplit(MonthStamp(2005, 2), MonthStamp(2021, 1), MonthStamp(2021, 2), MonthStamp(2025, 2))


def parse_scheme(text: str) -> EvaluationScheme:
    """Parse the CLI spelling: ``80-20``, ``rolling:W-H`` or ``fixed:A..B,C..D``."""
    text = text.strip()
    if text == "80-20":
        return ProportionalSplit(0.8, "80-20")
    m = re.fullmatch(r"rolling:(\d+)-(\d+)", text)
    if m:
        return Rolling(int(m.group(1)), int(m.group(2)))
    m = re.fullmatch(r"fixed:([\d-]+)\.\.([\d-]+),([\d-]+)\.\.([\d-]+)", text)
    if m:
        try:
            return FixedSplit(*(MonthStamp.parse(g) for g in m.groups()))
        except ValueError as exc:
            raise ConfigInvalid(f"bad fixed split {text!r}: {exc}") from exc
    raise ConfigInvalid(f"unrecognised scheme {text!r}; use 80-20, rolling:W-H or fixed:A..B,C..D")


def scheme_slug(scheme: EvaluationScheme) -> str:
    """File-name-safe scheme label (``rolling:12-4`` -> ``rolling-12-4``)."""
    return re.sub(r"[^A-Za-z0-9.-]+", "-", scheme.label).strip("-")


@dataclass(frozen=True)
class Fold:
    index: int
    train: range
    test: range


def folds(dataset: SupervisedDataset, scheme: EvaluationScheme) -> list[Fold]:
    n = len(dataset)
    if isinstance(scheme, ProportionalSplit):
        scheme = scheme.resolve(dataset)
    if isinstance(scheme, FixedSplit):
        pos = {s: i for i, s in enumerate(dataset.stamps)}
        for endpoint in (scheme.train_start, scheme.test_end):
            if endpoint not in pos:
                raise DatasetTooShort(
                    f"split endpoint {endpoint} outside dataset {dataset.stamps[0]}..{dataset.stamps[-1]}"
                )
        a, b = pos[scheme.train_start], pos[scheme.train_end]
        c, d = pos[scheme.test_start], pos[scheme.test_end]
        return [Fold(0, range(a, b + 1), range(c, d + 1))]

    w, h = scheme.window_months, scheme.horizon_months
    count = (n - w) // h if n > w else 0
    if count < 1:
        raise DatasetTooShort(f"{n} rows cannot hold one {scheme.label} fold")
    return [Fold(k, range(k * h, k * h + w), range(w + k * h, w + k * h + h)) for k in range(count)]


@dataclass(frozen=True)
class Standardizer:
    mean: np.ndarray
    sd: np.ndarray

    def apply(self, values: np.ndarray) -> np.ndarray:
        return (np.asarray(values, dtype=np.float64) - self.mean) / self.sd

    def invert(self, values: np.ndarray) -> np.ndarray:
        return np.asarray(values, dtype=np.float64) * self.sd + self.mean


def fit_standardizer(rows: np.ndarray) -> Standardizer:
    """Column means and sample standard deviations of the training rows."""
    rows = np.asarray(rows, dtype=np.float64)
    if rows.ndim == 1:
        rows = rows[:, None]
        squeeze = True
    else:
        squeeze = False
    if rows.shape[0] < 2:
        raise DegenerateColumn(f"standardizing needs at least 2 rows, got {rows.shape[0]}")
    mean = rows.mean(axis=0)
    sd = rows.std(axis=0, ddof=1)
    flat = np.flatnonzero(~(sd > 1e-12 * np.maximum(1.0, np.abs(mean))))
    if flat.size:
        raise DegenerateColumn(f"column(s) {flat.tolist()} constant over the training rows")
    if squeeze:
        return Standardizer(mean[0], sd[0])
    return Standardizer(mean, sd)
