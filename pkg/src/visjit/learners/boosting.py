"""Gradient boosting on log-loss with depth-limited regression trees."""
from __future__ import annotations

import math

import numpy as np
from scipy.special import expit

from .tree import Tree, grow_regressor


def base_score(y: np.ndarray) -> float:
    """Log-odds of the training prevalence, clipped away from ±inf."""
    p = float(np.clip(np.mean(y), 1e-12, 1 - 1e-12))
    return math.log(p / (1 - p))


def log_loss(y: np.ndarray, raw: np.ndarray) -> float:
    return float(np.mean(np.logaddexp(0.0, raw) - y * raw))


def fit_boosting(
    X: np.ndarray,
    y: np.ndarray,
    n_estimators: int = 100,
    learning_rate: float = 0.1,
    max_depth: int = 3,
    second_order: bool = False,
    reg_lambda: float = 0.0,
    min_child_weight: float = 0.0,
):
    """Return ``(init, trees, losses)``; ``losses[k]`` is the training loss after k trees.

    First-order mode picks splits on residual variance and sets leaves by a
    Newton step. Second-order mode uses the hessian and L2 leaf penalty for
    both splits and leaves.
    """
    y = np.asarray(y, dtype=np.float64)
    init = base_score(y)
    raw = np.full(y.shape, init)
    ones = np.ones_like(y)
    trees: list[Tree] = []
    losses = [log_loss(y, raw)]
    for _ in range(n_estimators):
        p = expit(raw)
        residual = y - p
        hess = p * (1 - p)
        tree = grow_regressor(
            X,
            residual,
            hess,
            max_depth=max_depth,
            reg_lambda=reg_lambda,
            min_child_weight=min_child_weight,
            split_hess=None if second_order else ones,
        )
        raw = raw + learning_rate * tree.predict(X)
        trees.append(tree)
        losses.append(log_loss(y, raw))
    return init, trees, losses


def decision_function(init: float, trees: list[Tree], learning_rate: float, X: np.ndarray) -> np.ndarray:
    raw = np.full(X.shape[0], init, dtype=np.float64)
    for t in trees:
        raw += learning_rate * t.predict(X)
    return raw
