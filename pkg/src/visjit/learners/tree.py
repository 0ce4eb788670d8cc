"""Binary decision trees stored as flat arrays.

Two growers share the layout: an information-gain classifier (used by the
single tree and the forest) and a second-order regression tree (used by
both boosting variants).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import kernels

LEAF = -1


@dataclass
class Tree:
    feature: np.ndarray  # int, LEAF for leaves
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Leaf index reached by every row of ``X``."""
        node = np.zeros(X.shape[0], dtype=np.intp)
        active = self.feature[node] != LEAF
        while active.any():
            rows = np.nonzero(active)[0]
            cur = node[rows]
            go_left = X[rows, self.feature[cur]] <= self.threshold[cur]
            node[rows] = np.where(go_left, self.left[cur], self.right[cur])
            active[rows] = self.feature[node[rows]] != LEAF
        return node

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.value[self.apply(X)]

    @property
    def n_nodes(self) -> int:
        return int(self.feature.size)

    def depth(self) -> int:
        depth = np.zeros(self.n_nodes, dtype=int)
        for i in range(self.n_nodes):
            if self.feature[i] != LEAF:
                depth[self.left[i]] = depth[self.right[i]] = depth[i] + 1
        return int(depth.max()) if self.n_nodes else 0

    def to_dict(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> Tree:
        return cls(
            np.asarray(d["feature"], dtype=np.intp),
            np.asarray(d["threshold"], dtype=np.float64),
            np.asarray(d["left"], dtype=np.intp),
            np.asarray(d["right"], dtype=np.intp),
            np.asarray(d["value"], dtype=np.float64),
        )


class _Builder:
    def __init__(self) -> None:
        self.feature: list[int] = []
        self.threshold: list[float] = []
        self.left: list[int] = []
        self.right: list[int] = []
        self.value: list[float] = []

    def node(self, value: float) -> int:
        self.feature.append(LEAF)
        self.threshold.append(0.0)
        self.left.append(LEAF)
        self.right.append(LEAF)
        self.value.append(value)
        return len(self.feature) - 1

    def split(self, i: int, feature: int, threshold: float, left: int, right: int) -> None:
        self.feature[i], self.threshold[i] = feature, threshold
        self.left[i], self.right[i] = left, right

    def build(self) -> Tree:
        return Tree(
            np.asarray(self.feature, dtype=np.intp),
            np.asarray(self.threshold, dtype=np.float64),
            np.asarray(self.left, dtype=np.intp),
            np.asarray(self.right, dtype=np.intp),
            np.asarray(self.value, dtype=np.float64),
        )


def _candidate_features(n_features: int, max_features: int | None, rng: np.random.Generator | None):
    """Feature visiting order: natural order unless a subsample is requested."""
    if max_features is None or max_features >= n_features:
        return np.arange(n_features), n_features
    return rng.permutation(n_features), max_features


def grow_classifier(
    X: np.ndarray,
    y: np.ndarray,
    idx: np.ndarray | None = None,
    max_depth: int | None = None,
    min_samples_split: int = 2,
    min_samples_leaf: int = 1,
    max_features: int | None = None,
    rng: np.random.Generator | None = None,
) -> Tree:
    """Grow an information-gain tree; leaves hold P(y = 1).

    ``idx`` may repeat rows (bootstrap samples). With ``max_features`` set, a
    fresh random subset is drawn per node; when none of it yields a split the
    remaining features are tried too.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    idx = np.arange(X.shape[0], dtype=np.intp) if idx is None else np.asarray(idx, dtype=np.intp)
    b = _Builder()
    stack = [(b.node(float(y[idx].mean())), idx, 0)]
    while stack:
        node, rows, depth = stack.pop()
        pos = y[rows].sum()
        if (
            rows.size < min_samples_split
            or pos == 0
            or pos == rows.size
            or (max_depth is not None and depth >= max_depth)
        ):
            continue
        order, k = _candidate_features(X.shape[1], max_features, rng)
        f, thr, _ = kernels.best_split_entropy(X, y, rows, order[:k], min_samples_leaf)
        if f == LEAF and k < order.size:
            f, thr, _ = kernels.best_split_entropy(X, y, rows, order[k:], min_samples_leaf)
        if f == LEAF:
            continue
        mask = X[rows, f] <= thr
        lrows, rrows = rows[mask], rows[~mask]
        left = b.node(float(y[lrows].mean()))
        right = b.node(float(y[rrows].mean()))
        b.split(node, f, thr, left, right)
        stack.append((right, rrows, depth + 1))
        stack.append((left, lrows, depth + 1))
    return b.build()


def grow_regressor(
    X: np.ndarray,
    grad: np.ndarray,
    hess: np.ndarray,
    max_depth: int = 3,
    reg_lambda: float = 0.0,
    min_samples_leaf: int = 1,
    min_child_weight: float = 0.0,
    split_hess: np.ndarray | None = None,
) -> Tree:
    """Grow a depth-limited tree on (gradient, hessian) statistics.

    Splits maximize GL²/(HL+λ) + GR²/(HR+λ) − G²/(H+λ) computed with
    ``split_hess`` (defaults to ``hess``); leaves hold the Newton step
    ΣG/(ΣH+λ) with ``grad`` taken as the negative gradient.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    grad = np.ascontiguousarray(grad, dtype=np.float64)
    hess = np.ascontiguousarray(hess, dtype=np.float64)
    split_hess = hess if split_hess is None else np.ascontiguousarray(split_hess, dtype=np.float64)

    def leaf_value(rows: np.ndarray) -> float:
        denom = hess[rows].sum() + reg_lambda
        return float(grad[rows].sum() / denom) if abs(denom) > 1e-150 else 0.0

    rows0 = np.arange(X.shape[0], dtype=np.intp)
    b = _Builder()
    features = np.arange(X.shape[1], dtype=np.intp)
    stack = [(b.node(leaf_value(rows0)), rows0, 0)]
    while stack:
        node, rows, depth = stack.pop()
        if depth >= max_depth or rows.size < 2:
            continue
        f, thr, gain = kernels.best_split_gradient(
            X, grad, split_hess, rows, features, reg_lambda, min_samples_leaf, min_child_weight
        )
        if f == LEAF or not gain > 0:
            continue
        mask = X[rows, f] <= thr
        lrows, rrows = rows[mask], rows[~mask]
        left, right = b.node(leaf_value(lrows)), b.node(leaf_value(rrows))
        b.split(node, f, thr, left, right)
        stack.append((right, rrows, depth + 1))
        stack.append((left, lrows, depth + 1))
    return b.build()
