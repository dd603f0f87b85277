"""First-order and quasi-Newton minimizers over a plain differentiable objective.

All three optimizers share one objective contract: ``objective.evaluate(theta,
batch)`` returns ``(loss, gradient)`` where ``batch`` is an index array of
training rows, or None for the full training set.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import NonFiniteLoss

Evaluator = Callable[[np.ndarray, Optional[np.ndarray]], "tuple[float, np.ndarray]"]


@dataclass
class Objective:
    fun: Evaluator
    dimension: int
    n_rows: Optional[int] = None

    def evaluate(self, theta: np.ndarray, batch: Optional[np.ndarray] = None):
        loss, grad = self.fun(theta, batch)
        return float(loss), np.asarray(grad, dtype=np.float64)


@dataclass(frozen=True)
class SGDConfig:
    learning_rate: float = 0.01
    decay: float = 1e-4
    batch_size: int = 16
    max_epochs: int = 200
    gradient_tolerance: float = 1e-6

    def __post_init__(self):
        if self.learning_rate <= 0 or self.gradient_tolerance <= 0:
            raise ValueError("learning rate and tolerance must be positive")
        if self.decay < 0:
            raise ValueError("decay must be non-negative")
        if self.batch_size < 1 or self.max_epochs < 1:
            raise ValueError("batch_size and max_epochs must be >= 1")


@dataclass(frozen=True)
class AdamConfig:
    alpha: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    batch_size: int = 16
    max_epochs: int = 200
    gradient_tolerance: float = 1e-6

    def __post_init__(self):
        if self.alpha <= 0 or self.eps <= 0 or self.gradient_tolerance <= 0:
            raise ValueError("alpha, eps and tolerance must be positive")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ValueError("beta1 and beta2 must lie in [0, 1)")
        if self.batch_size < 1 or self.max_epochs < 1:
            raise ValueError("batch_size and max_epochs must be >= 1")


@dataclass(frozen=True)
class LBFGSConfig:
    memory: int = 10
    max_iterations: int = 200
    gradient_tolerance: float = 1e-6
    c1: float = 1e-4
    c2: float = 0.9
    max_line_search: int = 30

    def __post_init__(self):
        if self.memory < 0:
            raise ValueError("memory must be >= 0")
        if self.max_iterations < 1 or self.gradient_tolerance <= 0:
            raise ValueError("max_iterations must be >= 1 and tolerance positive")
        if not 0 < self.c1 < self.c2 < 1:
            raise ValueError("Wolfe constants need 0 < c1 < c2 < 1")


@dataclass
class OptimizerTrace:
    iterations: list = field(default_factory=list)
    losses: list = field(default_factory=list)
    grad_norms: list = field(default_factory=list)
    reason: str = ""
    evaluations: int = 0

    def record(self, iteration: int, loss: float, grad: np.ndarray) -> None:
        self.iterations.append(iteration)
        self.losses.append(loss)
        self.grad_norms.append(float(np.max(np.abs(grad))) if grad.size else 0.0)


def _checked(objective: Objective, theta, batch, trace: OptimizerTrace):
    loss, grad = objective.evaluate(theta, batch)
    trace.evaluations += 1
    if not (math.isfinite(loss) and np.all(np.isfinite(grad))):
        trace.reason = "non-finite-loss"
        raise NonFiniteLoss(f"loss or gradient became non-finite after {trace.evaluations} evaluations", trace)
    return loss, grad


def _batches(n_rows: Optional[int], batch_size: int, rng: np.random.Generator):
    if n_rows is None or batch_size >= n_rows:
        return [None]
    order = rng.permutation(n_rows)
    return [order[i:i + batch_size] for i in range(0, n_rows, batch_size)]


def sgd_minimize(objective: Objective, theta0, config: SGDConfig = SGDConfig(), seed: int = 0):
    """Plain SGD with step size lr / (1 + decay * k), k counting updates.

    Mini-batches are reshuffled each epoch; the full-batch gradient is checked
    against the tolerance at the start of every epoch.
    """
    rng = np.random.default_rng(seed)
    theta = np.array(theta0, dtype=np.float64)
    trace = OptimizerTrace()
    k = 0
    for epoch in range(config.max_epochs):
        loss, grad = _checked(objective, theta, None, trace)
        trace.record(epoch, loss, grad)
        if trace.grad_norms[-1] <= config.gradient_tolerance:
            trace.reason = "gradient-tolerance"
            return theta, trace
        for batch in _batches(objective.n_rows, config.batch_size, rng):
            if batch is not None:
                _, grad = _checked(objective, theta, batch, trace)
            theta = theta - config.learning_rate / (1.0 + config.decay * k) * grad
            k += 1
    loss, grad = _checked(objective, theta, None, trace)
    trace.record(config.max_epochs, loss, grad)
    trace.reason = "gradient-tolerance" if trace.grad_norms[-1] <= config.gradient_tolerance else "max-epochs"
    return theta, trace


def adam_minimize(objective: Objective, theta0, config: AdamConfig = AdamConfig(), seed: int = 0):
    rng = np.random.default_rng(seed)
    theta = np.array(theta0, dtype=np.float64)
    m = np.zeros_like(theta)
    v = np.zeros_like(theta)
    trace = OptimizerTrace()
    t = 0
    for epoch in range(config.max_epochs):
        loss, grad = _checked(objective, theta, None, trace)
        trace.record(epoch, loss, grad)
        if trace.grad_norms[-1] <= config.gradient_tolerance:
            trace.reason = "gradient-tolerance"
            return theta, trace
        for batch in _batches(objective.n_rows, config.batch_size, rng):
            if batch is not None:
                _, grad = _checked(objective, theta, batch, trace)
            t += 1
            m = config.beta1 * m + (1 - config.beta1) * grad
            v = config.beta2 * v + (1 - config.beta2) * grad * grad
            m_hat = m / (1 - config.beta1 ** t)
            v_hat = v / (1 - config.beta2 ** t)
            theta = theta - config.alpha * m_hat / (np.sqrt(v_hat) + config.eps)
    loss, grad = _checked(objective, theta, None, trace)
    trace.record(config.max_epochs, loss, grad)
    trace.reason = "gradient-tolerance" if trace.grad_norms[-1] <= config.gradient_tolerance else "max-epochs"
    return theta, trace


def _cubic_min(a, fa, da, b, fb, db):
    """Minimizer of the cubic through (a, fa, da) and (b, fb, db), or None."""
    d1 = da + db - 3 * (fa - fb) / (a - b)
    rad = d1 * d1 - da * db
    if rad < 0 or not math.isfinite(rad):
        return None
    d2 = math.copysign(math.sqrt(rad), b - a)
    denom = db - da + 2 * d2
    if denom == 0:
        return None
    x = b - (b - a) * (db + d2 - d1) / denom
    return x if math.isfinite(x) else None


def _strong_wolfe(phi, f0, d0, alpha1, c1, c2, max_iter):
    """Bracketing + zoom line search (Nocedal & Wright, Alg. 3.5/3.6).

    ``phi(alpha)`` returns ``(f, grad, dphi)``.  Returns ``(alpha, f, grad, ok)``
    where ``ok`` is False when no strong-Wolfe point was found; in that case the
    best sufficient-decrease point seen is returned, or alpha=None if none.

    Once f(alpha) is within rounding noise of f0 the Armijo test is meaningless,
    so the approximate Wolfe test of Hager & Zhang is used instead: the step is
    judged on its derivative and may raise f by at most ``noise``.
    """
    noise = _noise(f0)
    best = None

    def decreases(alpha, f, d, f_ref):
        if not math.isfinite(f):
            return False
        if abs(f - f0) <= noise:
            return d <= (1 - 2 * c1) * -d0
        return f <= f0 + c1 * alpha * d0 and f < f_ref

    def consider(alpha, f, g, d):
        nonlocal best
        if decreases(alpha, f, d, math.inf) and (best is None or f < best[1]):
            best = (alpha, f, g)

    def zoom(lo, f_lo, d_lo, hi, f_hi, d_hi, budget):
        for _ in range(budget):
            width = hi - lo
            if abs(width) < 1e-16 * max(1.0, abs(lo)):
                break
            trial = None
            if math.isfinite(f_hi) and d_hi is not None:
                trial = _cubic_min(lo, f_lo, d_lo, hi, f_hi, d_hi)
            left, right = min(lo, hi), max(lo, hi)
            margin = 0.1 * abs(width)
            if trial is None or not (left + margin <= trial <= right - margin):
                trial = lo + 0.5 * width
            f, g, d = phi(trial)
            consider(trial, f, g, d)
            if not decreases(trial, f, d, f_lo if lo > 0 else math.inf):
                hi, f_hi, d_hi = trial, f, (d if math.isfinite(f) else None)
            else:
                if abs(d) <= -c2 * d0:
                    return trial, f, g, True
                if d * (hi - lo) >= 0:
                    hi, f_hi, d_hi = lo, f_lo, d_lo
                lo, f_lo, d_lo = trial, f, d
        return None

    prev, f_prev, d_prev = 0.0, f0, d0
    alpha = alpha1
    for i in range(max_iter):
        f, g, d = phi(alpha)
        consider(alpha, f, g, d)
        if not decreases(alpha, f, d, f_prev if i > 0 else math.inf):
            res = zoom(prev, f_prev, d_prev, alpha, f, d if math.isfinite(f) else None, max_iter)
            break
        if abs(d) <= -c2 * d0:
            return alpha, f, g, True
        if d >= 0:
            res = zoom(alpha, f, d, prev, f_prev, d_prev, max_iter)
            break
        prev, f_prev, d_prev = alpha, f, d
        alpha = 2.0 * alpha
    else:
        res = None
    if res is not None:
        return res
    if best is not None:
        return best[0], best[1], best[2], False
    return None, f0, None, False


def _noise(f):
    return 1e-12 * max(1.0, abs(f))


def _two_loop(grad, pairs, gamma):
    q = grad.copy()
    alphas = []
    for s, y, rho in reversed(pairs):
        a = rho * (s @ q)
        alphas.append(a)
        q -= a * y
    r = gamma * q
    for (s, y, rho), a in zip(pairs, reversed(alphas)):
        b = rho * (y @ r)
        r += (a - b) * s
    return r


def lbfgs_minimize(objective: Objective, theta0, config: LBFGSConfig = LBFGSConfig()):
    """Limited-memory BFGS over the full batch with a strong-Wolfe line search.

    Curvature pairs with s.y <= 1e-10 |s| |y| are not stored (a scale-free
    cutoff; an absolute one discards every pair once steps get small).  Accepted iterates never
    increase the loss by more than 1e-12 relative (rounding noise).  A failed line search
    ends the run and returns the best iterate with reason ``line-search-failed``.
    """
    theta = np.array(theta0, dtype=np.float64)
    trace = OptimizerTrace()
    loss, grad = _checked(objective, theta, None, trace)
    trace.record(0, loss, grad)
    pairs = deque(maxlen=config.memory) if config.memory > 0 else None
    gamma = 1.0

    for k in range(1, config.max_iterations + 1):
        if trace.grad_norms[-1] <= config.gradient_tolerance:
            trace.reason = "gradient-tolerance"
            return theta, trace
        direction = -_two_loop(grad, list(pairs), gamma) if pairs else -grad
        slope = float(grad @ direction)
        if not slope < 0:
            direction, slope = -grad, -float(grad @ grad)

        def phi(alpha):
            f, g = objective.evaluate(theta + alpha * direction, None)
            trace.evaluations += 1
            if not (math.isfinite(f) and np.all(np.isfinite(g))):
                return math.inf, None, math.nan
            return f, g, float(g @ direction)

        alpha, f_new, g_new, ok = _strong_wolfe(
            phi, loss, slope, 1.0, config.c1, config.c2, config.max_line_search
        )
        if alpha is None or not f_new <= loss + _noise(loss):
            trace.reason = "line-search-failed"
            return theta, trace

        step = alpha * direction
        y = g_new - grad
        sy = float(step @ y)
        if pairs is not None and sy > 1e-10 * np.linalg.norm(step) * np.linalg.norm(y):
            pairs.append((step, y, 1.0 / sy))
            gamma = sy / float(y @ y)
        theta, loss, grad = theta + step, f_new, g_new
        trace.record(k, loss, grad)
        if not ok:
            trace.reason = "line-search-failed"
            return theta, trace

    trace.reason = (
        "gradient-tolerance" if trace.grad_norms[-1] <= config.gradient_tolerance else "max-iterations"
    )
    return theta, trace


def check_gradient(objective: Objective, theta, step: float = 1e-5) -> float:
    """Max over coordinates of |analytic - central difference| / max(1, |analytic|)."""
    if step <= 0:
        raise ValueError("step must be positive")
    theta = np.array(theta, dtype=np.float64)
    _, analytic = objective.evaluate(theta, None)
    worst = 0.0
    for i in range(theta.size):
        e = np.zeros_like(theta)
        e[i] = step
        fp, _ = objective.evaluate(theta + e, None)
        fm, _ = objective.evaluate(theta - e, None)
        numeric = (fp - fm) / (2 * step)
        worst = max(worst, abs(analytic[i] - numeric) / max(1.0, abs(analytic[i])))
    return worst
