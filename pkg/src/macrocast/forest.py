"""Bagged CART regression forest.

Trees are stored as flat node arrays.  Tree b draws its bootstrap sample and
feature subsets from its own generator seeded by (seed, b), so trees can be
fitted in any order, or in parallel, with identical results.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DimensionMismatch, TooFewRows


@dataclass(frozen=True)
class ForestConfig:
    n_trees: int = 500
    mtry: Optional[int] = None  # None -> max(1, ceil(p / 3))
    min_node_size: int = 5
    max_depth: Optional[int] = None
    bootstrap: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.n_trees < 1:
            raise ValueError("n_trees must be >= 1")
        if self.mtry is not None and self.mtry < 1:
            raise ValueError("mtry must be >= 1")
        if self.min_node_size < 1:
            raise ValueError("min_node_size must be >= 1")

    def resolved_mtry(self, n_features: int) -> int:
        mtry = self.mtry if self.mtry is not None else max(1, math.ceil(n_features / 3))
        if mtry > n_features:
            raise ValueError(f"mtry={mtry} exceeds the {n_features} available features")
        return mtry


@dataclass
class RegressionTree:
    feature: np.ndarray  # -1 marks a leaf
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    n_samples: np.ndarray

    @property
    def n_leaves(self) -> int:
        return int(np.sum(self.feature < 0))

    def predict(self, X: np.ndarray) -> np.ndarray:
        node = np.zeros(X.shape[0], dtype=np.int64)
        active = self.feature[node] >= 0
        while active.any():
            idx = np.flatnonzero(active)
            nd = node[idx]
            go_left = X[idx, self.feature[nd]] <= self.threshold[nd]
            node[idx] = np.where(go_left, self.left[nd], self.right[nd])
            active = self.feature[node] >= 0
        return self.value[node]


def _best_split(X, y, features):
    """Best (gain, feature, threshold) over the given features, or None.

    The gain is the drop in within-node sum of squares.  Ties go to the lowest
    feature index, then the lowest threshold (argmax returns the first maximum
    and features are scanned in ascending order).
    """
    feats = np.sort(np.asarray(features))
    n = len(y)
    Xf = X[:, feats]
    order = np.argsort(Xf, axis=0, kind="stable")
    xs = np.take_along_axis(Xf, order, axis=0)
    valid = xs[1:] > xs[:-1]
    if not valid.any():
        return None
    csum = np.cumsum(y[order], axis=0)[:-1]
    total = float(y.sum())
    n_left = np.arange(1, n)[:, None]
    # maximizing S_L^2/n_L + S_R^2/n_R minimizes the children's SSE
    score = np.where(valid, csum**2 / n_left + (total - csum) ** 2 / (n - n_left), -np.inf)
    rows = np.argmax(score, axis=0)
    col_best = score[rows, np.arange(len(feats))]
    j = int(np.argmax(col_best))
    i = int(rows[j])
    return col_best[j] - total**2 / n, int(feats[j]), 0.5 * (xs[i, j] + xs[i + 1, j])


def fit_tree(X, y, mtry, min_node_size, max_depth, rng) -> RegressionTree:
    n, p = X.shape
    feature, threshold, left, right, value, counts = [], [], [], [], [], []

    def new_node(idx):
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(float(y[idx].sum()) / len(idx))
        counts.append(len(idx))
        return len(feature) - 1

    stack = [(new_node(np.arange(n)), np.arange(n), 0)]
    while stack:
        node, idx, depth = stack.pop()
        yi = y[idx]
        if len(idx) < min_node_size or len(idx) < 2 or np.all(yi == yi[0]):
            continue
        if max_depth is not None and depth >= max_depth:
            continue
        Xi = X[idx]
        perm = rng.permutation(p)
        split = _best_split(Xi, yi, perm[:mtry])
        # no usable split among the sampled features: keep drawing the rest
        rest = mtry
        while split is None and rest < p:
            split = _best_split(Xi, yi, perm[rest:rest + 1])
            rest += 1
        if split is None:
            continue
        _, f, thr = split
        mask = Xi[:, f] <= thr
        li, ri = idx[mask], idx[~mask]
        feature[node], threshold[node] = f, thr
        left[node], right[node] = new_node(li), new_node(ri)
        stack.append((right[node], ri, depth + 1))
        stack.append((left[node], li, depth + 1))

    return RegressionTree(
        np.array(feature, dtype=np.int64),
        np.array(threshold, dtype=np.float64),
        np.array(left, dtype=np.int64),
        np.array(right, dtype=np.int64),
        np.array(value, dtype=np.float64),
        np.array(counts, dtype=np.int64),
    )


def tree_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, index]))


@dataclass
class Forest:
    trees: list
    config: ForestConfig
    n_features: int

    def predict(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != self.n_features:
            raise DimensionMismatch(f"expected {self.n_features} features, got {X.shape[1]}")
        total = np.zeros(X.shape[0])
        for tree in self.trees:
            total += tree.predict(X)
        return total / len(self.trees)


def fit_tree_for(X, y, config: ForestConfig, index: int) -> RegressionTree:
    rng = tree_rng(config.seed, index)
    n = len(y)
    idx = rng.integers(0, n, n) if config.bootstrap else np.arange(n)
    return fit_tree(X[idx], y[idx], config.resolved_mtry(X.shape[1]), config.min_node_size, config.max_depth, rng)


def fit_forest(X, y, config: ForestConfig = ForestConfig()) -> Forest:
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2 or y.shape != (X.shape[0],):
        raise DimensionMismatch("X must be 2-D with one target per row")
    if len(y) < 2:
        raise TooFewRows(f"forest needs at least 2 rows, got {len(y)}")
    config.resolved_mtry(X.shape[1])
    trees = [fit_tree_for(X, y, config, b) for b in range(config.n_trees)]
    return Forest(trees, config, X.shape[1])


def predict_forest(forest: Forest, X) -> np.ndarray:
    return forest.predict(X)
