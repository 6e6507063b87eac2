"""Logistic regression primitives used as the base learner everywhere.

The loss is the summed negative log-likelihood over labels in {-1, +1},
optionally with an L2 penalty on the non-intercept weights. Training uses a
damped Newton method with Armijo backtracking, which reaches tight gradient
tolerances on the small dimensions this package deals with.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .data import Boundary, Dataset


@dataclass(frozen=True)
class SolverConfig:
    tol: float = 1e-6
    max_iter: int = 10_000
    l2: float = 1e-6

    def __post_init__(self):
        if self.tol <= 0 or self.max_iter < 1 or self.l2 < 0:
            raise ValueError("invalid solver configuration")


@dataclass(frozen=True)
class LogisticLossState:
    value: float
    gradient: np.ndarray


@dataclass
class FitResult:
    boundary: Boundary
    trace: list[float] = field(default_factory=list)
    grad_norm: float = np.inf
    converged: bool = False
    iterations: int = 0


def log1pexp(t):
    """log(1 + exp(t)) without overflow."""
    t = np.asarray(t, dtype=float)
    return np.where(t > 0, t + np.log1p(np.exp(-np.abs(t))), np.log1p(np.exp(np.minimum(t, 0))))


def _penalty_mask(dim: int) -> np.ndarray:
    mask = np.ones(dim)
    mask[-1] = 0.0
    return mask


def _loss_terms(theta, Xa, y, w, l2):
    margins = y * (Xa @ theta)
    value = float(np.sum(w * log1pexp(-margins)))
    # d/dm log(1+exp(-m)) = -sigmoid(-m)
    coef = -w * y * expit(-margins)
    grad = Xa.T @ coef
    mask = _penalty_mask(theta.size)
    value += 0.5 * l2 * float(np.sum((theta * mask) ** 2))
    grad = grad + l2 * theta * mask
    return value, grad, margins


def weighted_nll_and_grad(b: Boundary, data: Dataset, weights, l2: float = 0.0) -> LogisticLossState:
    w = np.asarray(weights, dtype=float)
    if w.shape != (data.n,):
        raise ValueError(f"expected {data.n} weights, got {w.shape}")
    if np.any(w < 0):
        raise ValueError("weights must be nonnegative")
    if l2 < 0:
        raise ValueError("l2 must be nonnegative")
    if b.theta.size != data.dim + 1:
        raise ValueError("dimension mismatch between boundary and data")
    value, grad, _ = _loss_terms(b.theta, data.augmented(), data.labels, w, l2)
    return LogisticLossState(value, grad)


def nll_and_grad(b: Boundary, data: Dataset, l2: float = 0.0) -> LogisticLossState:
    return weighted_nll_and_grad(b, data, np.ones(data.n), l2)


def probability(b: Boundary, X) -> np.ndarray:
    """P(y=+1 | x) under the logistic model."""
    X = np.asarray(X, dtype=float)
    return expit(X @ b.weights + b.intercept)


def fit_logistic(
    data: Dataset,
    cfg: SolverConfig = SolverConfig(),
    weights=None,
    theta0=None,
) -> FitResult:
    """Minimise the (weighted) L2-regularised NLL by damped Newton steps."""
    Xa = data.augmented()
    y = data.labels.astype(float)
    w = np.ones(data.n) if weights is None else np.asarray(weights, dtype=float)
    if np.any(w < 0):
        raise ValueError("weights must be nonnegative")
    p = Xa.shape[1]
    mask = _penalty_mask(p)
    theta = np.zeros(p) if theta0 is None else np.array(theta0, dtype=float)

    value, grad, margins = _loss_terms(theta, Xa, y, w, cfg.l2)
    trace = [value]
    gnorm = float(np.linalg.norm(grad))
    it = 0
    while gnorm > cfg.tol and it < cfg.max_iter:
        s = expit(margins)
        h = w * s * (1.0 - s)
        H = (Xa * h[:, None]).T @ Xa + np.diag(cfg.l2 * mask)
        # tiny ridge keeps the solve well-posed on separable or collinear data
        H[np.diag_indices(p)] += 1e-12 * (1.0 + np.trace(H) / p)
        try:
            step = -np.linalg.solve(H, grad)
        except np.linalg.LinAlgError:
            step = -grad
        slope = float(grad @ step)
        if slope >= 0:
            step, slope = -grad, -float(grad @ grad)
        t = 1.0
        armijo = False
        while t >= 1e-12:
            cand = theta + t * step
            c_value, c_grad, c_margins = _loss_terms(cand, Xa, y, w, cfg.l2)
            if c_value <= value + 1e-4 * t * slope:
                armijo = True
                break
            t *= 0.5
        if not np.isfinite(c_value):
            raise FloatingPointError("non-finite loss during logistic training")
        if not armijo or value - c_value <= 1e-15 * abs(value):
            # no decrease left above rounding level: we are at numerical precision
            if armijo:
                theta, value, grad = cand, c_value, c_grad
                trace.append(value)
                gnorm = float(np.linalg.norm(grad))
                it += 1
            break
        theta, value, grad, margins = cand, c_value, c_grad, c_margins
        trace.append(value)
        gnorm = float(np.linalg.norm(grad))
        it += 1
    return FitResult(Boundary(theta), trace, gnorm, gnorm <= cfg.tol, it)


def train_unconstrained(data: Dataset, cfg: SolverConfig = SolverConfig()) -> FitResult:
    return fit_logistic(data, cfg)
