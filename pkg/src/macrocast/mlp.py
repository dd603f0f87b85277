"""Feed-forward rectifier network for regression, trained by SGD, Adam or L-BFGS.

Parameters live in one flat vector so the optimizers see a plain
``Objective``.  Layout per layer: weight matrix (fan_in x fan_out, row-major)
followed by the bias vector.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import optim
from .errors import DimensionMismatch, TooFewRows

OPTIMIZERS = ("sgd", "adam", "lbfgs")


@dataclass(frozen=True)
class MlpArchitecture:
    input_dim: int = 6
    hidden_layers: tuple = (32,)

    @property
    def sizes(self) -> list[int]:
        return [self.input_dim, *self.hidden_layers, 1]

    @property
    def n_params(self) -> int:
        s = self.sizes
        return sum(a * b + b for a, b in zip(s, s[1:]))

    def unpack(self, theta: np.ndarray):
        layers, pos = [], 0
        for a, b in zip(self.sizes, self.sizes[1:]):
            W = theta[pos:pos + a * b].reshape(a, b)
            pos += a * b
            layers.append((W, theta[pos:pos + b]))
            pos += b
        return layers

    def init_params(self, seed: int) -> np.ndarray:
        """Glorot-uniform draws for weights and biases alike."""
        rng = np.random.default_rng(seed)
        parts = []
        for a, b in zip(self.sizes, self.sizes[1:]):
            bound = np.sqrt(6.0 / (a + b))
            parts.append(rng.uniform(-bound, bound, a * b))
            parts.append(rng.uniform(-bound, bound, b))
        return np.concatenate(parts)


def forward(arch: MlpArchitecture, theta: np.ndarray, X: np.ndarray) -> np.ndarray:
    h = X
    layers = arch.unpack(theta)
    for W, b in layers[:-1]:
        h = np.maximum(h @ W + b, 0.0)
    W, b = layers[-1]
    return (h @ W + b)[:, 0]


def loss_and_grad(arch: MlpArchitecture, theta: np.ndarray, X: np.ndarray, y: np.ndarray):
    """Mean squared error and its gradient by back-propagation."""
    layers = arch.unpack(theta)
    acts = [X]
    pre = []
    h = X
    for W, b in layers[:-1]:
        z = h @ W + b
        pre.append(z)
        h = np.maximum(z, 0.0)
        acts.append(h)
    W, b = layers[-1]
    out = (h @ W + b)[:, 0]
    resid = out - y
    n = X.shape[0]
    loss = float(resid @ resid) / n

    grads = []
    delta = (2.0 / n) * resid[:, None]
    for i in range(len(layers) - 1, -1, -1):
        W, _ = layers[i]
        grads.append((acts[i].T @ delta, delta.sum(axis=0)))
        if i > 0:
            delta = (delta @ W.T) * (pre[i - 1] > 0)
    flat = []
    for gW, gb in reversed(grads):
        flat.append(gW.ravel())
        flat.append(gb)
    return loss, np.concatenate(flat)


def make_objective(arch: MlpArchitecture, X: np.ndarray, y: np.ndarray) -> optim.Objective:
    def fun(theta, batch):
        if batch is None:
            return loss_and_grad(arch, theta, X, y)
        return loss_and_grad(arch, theta, X[batch], y[batch])

    return optim.Objective(fun, arch.n_params, n_rows=X.shape[0])


@dataclass
class FittedMlp:
    architecture: MlpArchitecture
    params: np.ndarray
    optimizer: str = ""
    trace: optim.OptimizerTrace = field(default_factory=optim.OptimizerTrace)

    def predict(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != self.architecture.input_dim:
            raise DimensionMismatch(f"expected {self.architecture.input_dim} inputs, got {X.shape[1]}")
        return forward(self.architecture, self.params, X)


def fit(
    X,
    y,
    optimizer: str,
    seed: int = 0,
    architecture: MlpArchitecture | None = None,
    config=None,
) -> FittedMlp:
    """Train the network on (already standardized) rows.

    ``config`` overrides the optimizer's default settings; it must match the
    optimizer kind.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2 or y.shape != (X.shape[0],):
        raise DimensionMismatch("X must be 2-D with one target per row")
    if X.shape[0] < 2:
        raise TooFewRows(f"network training needs at least 2 rows, got {X.shape[0]}")
    arch = architecture or MlpArchitecture(input_dim=X.shape[1])
    if X.shape[1] != arch.input_dim:
        raise DimensionMismatch(f"expected {arch.input_dim} inputs, got {X.shape[1]}")

    objective = make_objective(arch, X, y)
    # separate streams for initialization and batch shuffling
    init_seed, shuffle_seed = np.random.SeedSequence(seed).generate_state(2)
    theta0 = arch.init_params(int(init_seed))
    if optimizer == "sgd":
        theta, trace = optim.sgd_minimize(objective, theta0, config or optim.SGDConfig(), int(shuffle_seed))
    elif optimizer == "adam":
        theta, trace = optim.adam_minimize(objective, theta0, config or optim.AdamConfig(), int(shuffle_seed))
    elif optimizer == "lbfgs":
        theta, trace = optim.lbfgs_minimize(objective, theta0, config or optim.LBFGSConfig())
    else:
        raise ValueError(f"unknown optimizer {optimizer!r}; expected one of {OPTIMIZERS}")
    return FittedMlp(arch, theta, optimizer, trace)
