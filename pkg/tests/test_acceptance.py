"""Acceptance criteria 1-10.

Each test prints one PASS/FAIL line (also repeated in the terminal summary).
Tolerances and time limits are fixed per criterion; where a criterion leaves
a choice open the choice is stated next to the test.
"""

import csv
import json
import math
import os
import time
from pathlib import Path

import numpy as np
import pytest

from macrocast import gam, mlp
from macrocast.arimax import fit_arimax
from macrocast.data_model import DEFAULT_PERIODS, MonthStamp, summarize
from macrocast.forest import ForestConfig, fit_forest
from macrocast.harness import MODELS, RunConfig, run
from macrocast.ingest import IngestConfig, ingest, write_panel_csv
from macrocast.metrics import PredictionSet, compute_metrics
from macrocast.optim import AdamConfig, LBFGSConfig, Objective, SGDConfig, adam_minimize, lbfgs_minimize, sgd_minimize
from macrocast.supervised import DEFAULT_SPLIT, Rolling, SupervisedDataset, folds, parse_scheme
from macrocast.synthetic import make_panel

from conftest import ACCEPTANCE_LINES


def verdict(number, name, ok, detail):
    line = f"criterion {number}: {'PASS' if ok else 'FAIL'} {name} ({detail})"
    print(line)
    ACCEPTANCE_LINES.append(line)
    assert ok, line


def _read(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_criterion_01_metric_oracle():
    rng = np.random.default_rng(2024)
    start = time.perf_counter()
    worst, ordered = 0.0, True
    for _ in range(1000):
        n = int(rng.integers(1, 51))
        y = rng.uniform(1, 1e5, n) * rng.choice([1e-3, 1.0, 1e2])
        yhat = y + rng.normal(0, rng.choice([0.01, 1.0, 1e3]), n)
        yhat[rng.random(n) < 0.1] = np.nan
        if np.isnan(yhat).all():
            yhat[0] = y[0] + 1.0
        stamps = tuple(MonthStamp(2000, 1).shift(i) for i in range(n))
        rep = compute_metrics(PredictionSet(stamps, y, yhat), seed=int(rng.integers(1 << 31)))
        # direct summation over the evaluated records
        abs_sum = sq_sum = obs_sum = 0.0
        count = 0
        for yi, pi in zip(y.tolist(), yhat.tolist()):
            if pi == pi:
                abs_sum += abs(yi - pi)
                sq_sum += (yi - pi) ** 2
                obs_sum += yi
                count += 1
        mae, rmse = abs_sum / count, math.sqrt(sq_sum / count)
        nrmse = rmse / (obs_sum / count)
        for got, want in ((rep.mae, mae), (rep.rmse, rmse), (rep.nrmse, nrmse)):
            worst = max(worst, abs(got - want) / max(abs(want), 1e-300))
        ordered &= rep.mae <= rep.rmse
    elapsed = time.perf_counter() - start
    verdict(1, "metric oracle equivalence", worst < 1e-12 and ordered and elapsed < 5,
            f"max rel err {worst:.1e}, MAE<=RMSE always: {ordered}, {elapsed:.2f}s")


def test_criterion_02_gradient_check():
    """Relative error |a - n| / max(|a|, |n|, 1e-4): the floor keeps entries whose
    true value is ~1e-6 from being judged on finite-difference rounding alone."""
    arch = mlp.MlpArchitecture()
    start = time.perf_counter()
    worst, used, seed = 0.0, 0, 0
    while used < 100:
        rng = np.random.default_rng(seed)
        X, y = rng.normal(size=(20, 6)), rng.normal(size=20)
        theta = arch.init_params(seed)
        seed += 1
        (W, b), _ = arch.unpack(theta)
        if np.min(np.abs(X @ W + b)) <= 1e-3:
            continue  # too close to a rectifier kink
        used += 1
        objective = mlp.make_objective(arch, X, y)
        _, grad = objective.evaluate(theta)
        for i in range(theta.size):
            e = np.zeros_like(theta)
            e[i] = 1e-5
            numeric = (objective.evaluate(theta + e)[0] - objective.evaluate(theta - e)[0]) / 2e-5
            worst = max(worst, abs(grad[i] - numeric) / max(abs(grad[i]), abs(numeric), 1e-4))
    elapsed = time.perf_counter() - start
    verdict(2, "MLP gradient correctness", worst < 1e-5 and elapsed < 10,
            f"max rel err {worst:.1e} over {used} instances, {elapsed:.2f}s")


def test_criterion_03_optimizer_battery():
    """Quadratics have spectra drawn log-uniformly from [1, 10]."""
    start = time.perf_counter()
    max_iter, max_grad, max_err = 0, 0.0, 0.0
    for seed in range(100):
        rng = np.random.default_rng(seed)
        Q, _ = np.linalg.qr(rng.normal(size=(10, 10)))
        A = Q @ np.diag(np.exp(rng.uniform(0, np.log(10), 10))) @ Q.T
        b = rng.normal(size=10)
        obj = Objective(lambda x, _b, A=A, b=b: (0.5 * x @ A @ x - b @ x, A @ x - b), 10)
        theta, trace = lbfgs_minimize(obj, np.zeros(10), LBFGSConfig(gradient_tolerance=1e-9, max_iterations=30))
        max_iter = max(max_iter, trace.iterations[-1])
        max_grad = max(max_grad, float(np.max(np.abs(A @ theta - b))))
        max_err = max(max_err, float(np.max(np.abs(theta - np.linalg.solve(A, b)))))
    lbfgs_ok = max_grad < 1e-8 and max_err < 1e-6 and max_iter <= 30

    rng = np.random.default_rng(7)
    X = rng.normal(size=(200, 6))
    y = X @ rng.normal(size=6) + 0.1 * rng.normal(size=200)

    def least_squares(theta, batch):
        r = X @ theta - y
        return 0.5 * float(r @ r) / len(y), X.T @ r / len(y)

    ls = Objective(least_squares, 6, n_rows=200)
    theta, _ = sgd_minimize(ls, np.zeros(6), SGDConfig(learning_rate=0.5, decay=0.0, batch_size=200,
                                                       max_epochs=2000, gradient_tolerance=1e-10))
    sgd_err = float(np.max(np.abs(theta - np.linalg.lstsq(X, y, rcond=None)[0])))

    alpha = 0.01
    step, _ = adam_minimize(ls, np.ones(6), AdamConfig(alpha=alpha, batch_size=200, max_epochs=1))
    adam_ratio = np.abs(step - 1.0) / alpha
    adam_ok = bool(np.all(np.abs(adam_ratio - 1) < 0.01))
    elapsed = time.perf_counter() - start
    verdict(3, "optimizer battery", lbfgs_ok and sgd_err < 1e-3 and adam_ok and elapsed < 10,
            f"L-BFGS max iters {max_iter}, max |g| {max_grad:.1e}, max sol err {max_err:.1e}; "
            f"SGD vs OLS {sgd_err:.1e}; Adam step/alpha in [{adam_ratio.min():.4f}, {adam_ratio.max():.4f}]; "
            f"{elapsed:.2f}s")


def test_criterion_04_reduction_oracles():
    rng = np.random.default_rng(11)
    X = rng.normal(size=(80, 6)) * [1, 10, 100, 0.1, 5, 2]
    y = 3 + X @ [0.5, -0.2, 0.01, 4.0, 0.0, 1.0] + rng.normal(size=80)
    fit = fit_arimax(X, y, (0, 0, 0))
    A = np.column_stack([np.ones(80), X])
    beta = np.linalg.lstsq(A, y, rcond=None)[0]
    arima_err = float(np.max(np.abs(np.concatenate([[fit.intercept], fit.gamma]) - beta)))

    Xg = rng.normal(size=(150, 6))
    yg = Xg @ rng.normal(size=6) + np.sin(2 * Xg[:, 0]) + 0.3 * rng.normal(size=150)
    g = gam.fit_gam(Xg, yg, lambdas=[gam.LAMBDA_GRID[-1]] * 6)
    Ag = np.column_stack([np.ones(150), Xg])
    ols = Ag @ np.linalg.lstsq(Ag, yg, rcond=None)[0]
    gam_gap = float(np.sqrt(np.mean((g.predict(Xg) - ols) ** 2)))

    Xf, yf = rng.normal(size=(100, 6)), rng.normal(size=100)
    forest = fit_forest(Xf, yf, ForestConfig(n_trees=1, bootstrap=False, min_node_size=1))
    rf_err = float(np.max(np.abs(forest.predict(Xf) - yf)))
    verdict(4, "reduction oracles", arima_err < 1e-6 and gam_gap < 1e-3 and rf_err == 0.0,
            f"ARIMAX(0,0,0) vs OLS {arima_err:.1e}; GAM(lambda max) vs OLS fit RMSE {gam_gap:.1e}; "
            f"RF train error {rf_err}")


def test_criterion_05_ar1_recovery():
    estimates = []
    for seed in range(20):
        rng = np.random.default_rng(seed)
        e = rng.normal(size=700)
        w = np.zeros(700)
        for t in range(1, 700):
            w[t] = 0.7 * w[t - 1] + e[t]
        estimates.append(fit_arimax(None, w[200:], (1, 0, 0)).phi[0])
    hits = sum(abs(p - 0.7) <= 0.1 for p in estimates)
    verdict(5, "AR(1) simulation recovery", hits >= 18,
            f"{hits}/20 within +-0.1, estimates {min(estimates):.3f}..{max(estimates):.3f}")


def test_criterion_06_fold_geometry():
    def dataset(n):
        stamps = tuple(MonthStamp(2005, 2).shift(i) for i in range(n))
        return SupervisedDataset("EM.T", stamps, np.zeros((n, 6)), np.zeros(n))

    ds = dataset(241)
    (f,) = folds(ds, parse_scheme("80-20"))
    split_ok = (
        (len(f.train), len(f.test)) == (192, 49)
        and (ds.stamps[f.train[0]], ds.stamps[f.train[-1]]) == (DEFAULT_SPLIT.train_start, DEFAULT_SPLIT.train_end)
        and (ds.stamps[f.test[0]], ds.stamps[f.test[-1]]) == (DEFAULT_SPLIT.test_start, DEFAULT_SPLIT.test_end)
    )
    rolling = [(fd.train, fd.test) for fd in folds(dataset(20), Rolling(12, 4))]
    rolling_ok = rolling == [(range(0, 12), range(12, 16)), (range(4, 16), range(16, 20))]
    counts_ok = all(len(folds(dataset(n), Rolling(6, 1))) == n - 6 for n in range(7, 260))
    verdict(6, "fold geometry", split_ok and rolling_ok and counts_ok,
            f"80-20 -> {len(f.train)}/{len(f.test)} rows, {ds.stamps[f.train[0]]}..{ds.stamps[f.train[-1]]} / "
            f"{ds.stamps[f.test[0]]}..{ds.stamps[f.test[-1]]}; 12-4 folds ok: {rolling_ok}; 6-1 counts ok: {counts_ok}")


def test_criterion_07_failure_semantics(tmp_path):
    panel_path = write_panel_csv(make_panel(40, seed=5), tmp_path / "panel.csv")
    result = run(RunConfig(panel_path, schemes=("rolling:6-1",), targets=("EM.T",), out_dir=tmp_path / "out"))
    rows = {r["model"]: r for r in _read(tmp_path / "out" / "metrics_rolling-6-1.csv")}
    arima = rows.get("arima", {})
    arima_ok = arima.get("coverage") == "0.0" and arima.get("note") == "TrainingTooShort"
    complete = sorted(rows) == sorted(MODELS) and len(result.tasks) == 6 * 33
    notes = ", ".join(f"{m}={r['note'] or 'ok'}" for m, r in rows.items())
    verdict(7, "failure semantics", arima_ok and complete,
            f"arima coverage {arima.get('coverage')} note {arima.get('note')!r}; "
            f"{len(rows)} model rows, notes: {notes}")


def test_criterion_08_determinism(tmp_path):
    panel_path = write_panel_csv(make_panel(120, seed=8), tmp_path / "panel.csv")
    base = dict(schemes=("80-20",), seed=42)
    without_rf = tuple(m for m in MODELS if m != "rf")
    run(RunConfig(panel_path, models=without_rf, out_dir=tmp_path / "a", **base))
    run(RunConfig(panel_path, models=without_rf, out_dir=tmp_path / "b", **base))
    run(RunConfig(panel_path, models=MODELS, out_dir=tmp_path / "c", **base))
    same_csv = (tmp_path / "a" / "metrics_80-20.csv").read_bytes() == (tmp_path / "b" / "metrics_80-20.csv").read_bytes()
    ma = json.loads((tmp_path / "a" / "manifest.json").read_text())
    mb = json.loads((tmp_path / "b" / "manifest.json").read_text())
    same_hashes = ma["results_sha256"] == mb["results_sha256"] and ma["outputs"] == mb["outputs"]
    old = (tmp_path / "a" / "metrics_80-20.csv").read_text().splitlines()
    new = (tmp_path / "c" / "metrics_80-20.csv").read_text().splitlines()
    kept = set(old) <= set(new)
    verdict(8, "determinism", same_csv and same_hashes and kept,
            f"metric CSV identical: {same_csv}; manifest hashes identical: {same_hashes}; "
            f"{len(old) - 1} rows unchanged after adding rf: {kept}")


def test_criterion_09_end_to_end(tmp_path):
    panel_path = write_panel_csv(make_panel(120, seed=9), tmp_path / "panel.csv")
    start = time.perf_counter()
    run(RunConfig(panel_path, schemes=("80-20", "rolling:12-4"), out_dir=tmp_path / "out"))
    elapsed = time.perf_counter() - start
    out = tmp_path / "out"
    tables = sorted(p.name for p in out.glob("metrics_*.csv"))
    traces = sorted(out.glob("predictions_*.csv"))
    shapes_ok = tables == ["metrics_80-20.csv", "metrics_rolling-12-4.csv"] and len(traces) == 6
    shapes_ok &= all(len(_read(out / t)) == 18 for t in tables)
    expected_rows = {"80-20": 24, "rolling-12-4": 104}  # 119 lagged rows
    for path in traces:
        rows = _read(path)
        slug = path.stem[len("predictions_"):].rsplit("_", 1)[0]
        shapes_ok &= len(rows) == expected_rows[slug] and list(rows[0]) == ["month", "observed", *MODELS]
    verdict(9, "end-to-end desk-scale run", shapes_ok and elapsed < 60,
            f"{elapsed:.1f}s, {len(tables)} metric tables, {len(traces)} prediction traces, shapes ok: {shapes_ok}")


FRED_CONFIG = os.environ.get("MACROCAST_FRED_CONFIG")


@pytest.mark.skipif(not FRED_CONFIG, reason="set MACROCAST_FRED_CONFIG to an ingest config of real FRED downloads")
def test_criterion_10_real_fred_data(tmp_path):
    """Soft check: FRED revises history, so a miss is reported as an expected failure."""
    config = IngestConfig.load(Path(FRED_CONFIG))
    panel = ingest(IngestConfig(config.series, MonthStamp(2005, 1), MonthStamp(2025, 2)))
    (p1,) = summarize(panel, [DEFAULT_PERIODS[0]], ["EM.T"])
    stats_ok = abs(p1.mean - 16355.77) <= 0.01 * 16355.77 and abs(p1.sd - 108.66) <= 0.01 * 108.66
    panel_path = write_panel_csv(panel, tmp_path / "panel.csv")
    run(RunConfig(panel_path, models=("rf",), targets=("EM.T",), out_dir=tmp_path / "out"))
    (row,) = _read(tmp_path / "out" / "metrics_80-20.csv")
    nrmse = float(row["nrmse"])
    ok = stats_ok and nrmse < 0.10
    line = (f"criterion 10: {'PASS' if ok else 'FAIL'} real FRED data (EM.T P1 mean {p1.mean:.2f}, "
            f"sd {p1.sd:.2f}; RF EM.T 80-20 N-RMSE {nrmse:.3f})")
    print(line)
    ACCEPTANCE_LINES.append(line)
    if not ok:
        pytest.xfail("real-data check missed; FRED revisions can move these values")
