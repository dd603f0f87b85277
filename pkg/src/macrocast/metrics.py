"""Point-forecast error metrics with a percentile-bootstrap interval for MAE."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .data_model import MonthStamp
from .errors import NonPositiveTestMean, NoPredictions

DEFAULT_BOOTSTRAP = 2000


@dataclass(frozen=True)
class PredictionSet:
    """Observed values and predictions for one (model, target, scheme); NaN = missing."""

    stamps: tuple[MonthStamp, ...]
    observed: np.ndarray
    predicted: np.ndarray

    def __post_init__(self):
        obs = np.asarray(self.observed, dtype=np.float64)
        pred = np.asarray(self.predicted, dtype=np.float64)
        if obs.shape != (len(self.stamps),) or pred.shape != obs.shape:
            raise ValueError("stamps, observed and predicted must have equal length")
        if not np.all(np.isfinite(obs)):
            raise ValueError("observed values must all be present")
        for a, b in zip(self.stamps, self.stamps[1:]):
            if not a < b:
                raise ValueError(f"stamps not strictly increasing at {b}")
        object.__setattr__(self, "stamps", tuple(self.stamps))
        object.__setattr__(self, "observed", obs)
        object.__setattr__(self, "predicted", pred)

    def __len__(self):
        return len(self.stamps)

    @property
    def evaluated(self) -> np.ndarray:
        return np.isfinite(self.predicted)


@dataclass(frozen=True)
class MetricReport:
    mae: float
    mae_ci_low: float
    mae_ci_high: float
    rmse: float
    nrmse: float
    n_evaluated: int
    n_total: int

    @property
    def coverage(self) -> float:
        return self.n_evaluated / self.n_total


def bootstrap_mae_ci(abs_errors: np.ndarray, n_boot: int, seed: int, level: float = 0.95):
    """Percentile interval of the mean of resampled absolute errors.

    Errors are sorted first so the interval does not depend on record order.
    """
    errs = np.sort(np.asarray(abs_errors, dtype=np.float64))
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, errs.size, size=(n_boot, errs.size))
    means = errs[idx].mean(axis=1)
    tail = 100 * (1 - level) / 2
    lo, hi = np.percentile(means, [tail, 100 - tail])
    return float(lo), float(hi)


def compute_metrics(predictions: PredictionSet, bootstrap_b: int = DEFAULT_BOOTSTRAP, seed: int = 0) -> MetricReport:
    mask = predictions.evaluated
    n_eval = int(mask.sum())
    if n_eval == 0:
        raise NoPredictions("no non-missing predictions to score")
    y = predictions.observed[mask]
    err = y - predictions.predicted[mask]
    abs_err = np.abs(err)
    mae = float(abs_err.mean())
    rmse = math.sqrt(float(np.mean(err * err)))
    y_bar = float(y.mean())
    if not y_bar > 0:
        raise NonPositiveTestMean(f"test-period mean {y_bar} is not positive; N-RMSE undefined")
    lo, hi = bootstrap_mae_ci(abs_err, bootstrap_b, seed)
    return MetricReport(mae, lo, hi, rmse, rmse / y_bar, n_eval, len(predictions))


def pool(sets: Sequence[PredictionSet]) -> PredictionSet:
    """Concatenate per-fold prediction sets into one, ordered by month."""
    stamps = [s for ps in sets for s in ps.stamps]
    obs = np.concatenate([ps.observed for ps in sets]) if sets else np.zeros(0)
    pred = np.concatenate([ps.predicted for ps in sets]) if sets else np.zeros(0)
    order = sorted(range(len(stamps)), key=lambda i: stamps[i])
    return PredictionSet(tuple(stamps[i] for i in order), obs[order], pred[order])
