"""Synthetic nine-series panels for demos and tests.

Features are positive random walks with drift on roughly the scales of the
real indicators (IT.F, the trade balance, is negative).  Each target is a
smooth function of the previous month's features plus noise, so the lagged
design has real signal to find.
"""

from __future__ import annotations

import numpy as np

from .data_model import FEATURES, TARGETS, MonthStamp, Panel

_FEATURE_LEVELS = {
    "BA.F": 2.0e5, "IN.F": 1.2e6, "CTS.F": 1.0e6, "CNS.F": 4.0e5, "MN.F": 4.5e5, "IT.F": -4.5e4,
}
_TARGET_LEVELS = {"EM.T": 1.8e4, "BA.T": 1.6e4, "CTS.T": 4.5e4}


def make_panel(n_months: int = 120, start: MonthStamp = MonthStamp(2005, 1), seed: int = 0) -> Panel:
    rng = np.random.default_rng(seed)
    feats = {}
    for name in FEATURES:
        level = _FEATURE_LEVELS[name]
        steps = rng.normal(0.003, 0.01, n_months)
        feats[name] = level * np.exp(np.cumsum(steps))
    F = np.column_stack([feats[f] for f in FEATURES])
    Fz = (F - F.mean(axis=0)) / F.std(axis=0)
    data = dict(feats)
    for i, name in enumerate(TARGETS):
        w = rng.normal(0, 1, len(FEATURES))
        signal = Fz @ w / np.sqrt(len(FEATURES)) + 0.3 * np.sin(Fz[:, i])
        lagged = np.concatenate([[signal[0]], signal[:-1]])
        data[name] = _TARGET_LEVELS[name] * (1 + 0.05 * lagged + rng.normal(0, 0.005, n_months))
    return Panel(start, start.shift(n_months - 1), data)
