"""Slow, obviously-correct reference implementations used as test oracles."""
from __future__ import annotations

import itertools
import math

import numpy as np


def entropy_direct(weights):
    w = [x for x in weights if x > 0]
    if len(w) == 1:
        return 0.0
    total = sum(w)
    return -sum((x / total) * math.log2(x / total) for x in w) / math.log2(len(w))


def auc_pairs(pos, neg):
    wins = 0.0
    for p in pos:
        for n in neg:
            wins += 1.0 if p > n else 0.5 if p == n else 0.0
    return wins / (len(pos) * len(neg))


def cliff_pairs(a, b):
    s = 0
    for x in a:
        for y in b:
            s += (x > y) - (x < y)
    return s / (len(a) * len(b))


def midranks(values):
    """Average 1-based ranks, computed by counting."""
    out = []
    for v in values:
        less = sum(1 for u in values if u < v)
        equal = sum(1 for u in values if u == v)
        out.append(less + (equal + 1) / 2.0)
    return out


def rank_sum_enumeration(a, b):
    """Two-sided permutation p of the rank sum of ``a`` over all label assignments."""
    pooled = list(a) + list(b)
    ranks = midranks(pooled)
    m, N = len(a), len(pooled)
    center = m * (N + 1) / 2.0
    obs = abs(sum(ranks[:m]) - center)
    hits = total = 0
    for combo in itertools.combinations(range(N), m):
        total += 1
        if abs(sum(ranks[i] for i in combo) - center) >= obs - 1e-9:
            hits += 1
    return hits / total


def mcc_formula(tp, fp, tn, fn):
    d = math.sqrt((tp + fp) * (tp + fn) * (tn + fp) * (tn + fn))
    return 0.0 if d == 0 else (tp * tn - fp * fn) / d


def spearman_rank_difference(x, y):
    """1 − 6Σd²/(n(n²−1)); valid for tie-free inputs only."""
    n = len(x)
    rx, ry = midranks(x), midranks(y)
    d2 = sum((p - q) ** 2 for p, q in zip(rx, ry))
    return 1 - 6 * d2 / (n * (n * n - 1))


def vif_from_inverse_correlation(X):
    """VIF_j is the j-th diagonal entry of the inverse Pearson correlation matrix."""
    C = np.corrcoef(np.asarray(X, dtype=float), rowvar=False)
    return np.diag(np.linalg.inv(C))


def log_loss_direct(y, p):
    return -sum(t * math.log(q) + (1 - t) * math.log(1 - q) for t, q in zip(y, p)) / len(y)


def _h2(p):
    return 0.0 if p in (0.0, 1.0) else -(p * math.log2(p) + (1 - p) * math.log2(1 - p))


def split_gains_entropy(X, y, idx, min_leaf=1):
    """Information gain of every (feature, midpoint) candidate, by direct partition."""
    idx = list(idx)
    n = len(idx)
    parent = _h2(sum(y[i] for i in idx) / n)
    out = {}
    for f in range(X.shape[1]):
        vals = sorted({X[i, f] for i in idx})
        for lo, hi in zip(vals, vals[1:]):
            t = (lo + hi) / 2.0
            left = [i for i in idx if X[i, f] <= t]
            right = [i for i in idx if X[i, f] > t]
            if len(left) < min_leaf or len(right) < min_leaf:
                continue
            child = sum(len(s) / n * _h2(sum(y[i] for i in s) / len(s)) for s in (left, right))
            out[(f, t)] = parent - child
    return out


def split_gains_gradient(X, g, h, idx, reg_lambda=0.0):
    """Second-order structure-score gain (without the ½ factor) of every candidate split."""
    idx = list(idx)

    def score(s):
        return sum(g[i] for i in s) ** 2 / (sum(h[i] for i in s) + reg_lambda)

    parent = score(idx)
    out = {}
    for f in range(X.shape[1]):
        vals = sorted({X[i, f] for i in idx})
        for lo, hi in zip(vals, vals[1:]):
            t = (lo + hi) / 2.0
            left = [i for i in idx if X[i, f] <= t]
            right = [i for i in idx if X[i, f] > t]
            out[(f, t)] = score(left) + score(right) - parent
    return out
