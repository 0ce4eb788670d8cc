"""Pure numpy split search, the fallback for :mod:`visjit._ckernels`.

Both backends share one contract. Candidate thresholds are midpoints between
consecutive distinct values of the node's samples; a sample goes left when
``x <= threshold``. Features are scanned in the given order and thresholds in
ascending order, and a candidate replaces the incumbent only on a strictly
larger gain, so ties resolve to the first candidate seen. ``feature == -1``
means no admissible split exists.
"""
from __future__ import annotations

import numpy as np

BACKEND = "python"


def _entropy(pos: np.ndarray, total: np.ndarray) -> np.ndarray:
    p = np.divide(pos, total, out=np.zeros_like(pos, dtype=np.float64), where=total > 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        h = -(np.where(p > 0, p * np.log2(p), 0.0) + np.where(p < 1, (1 - p) * np.log2(1 - p), 0.0))
    return np.where((p > 0) & (p < 1), h, 0.0)


def _threshold(lo: float, hi: float) -> float:
    t = (lo + hi) / 2.0
    return lo if t >= hi else t


def best_split_entropy(X, y, idx, features, min_leaf=1):
    """Best information-gain split for binary labels ``y`` (0/1 floats)."""
    idx = np.asarray(idx, dtype=np.intp)
    n = idx.size
    best = (-1, 0.0, -np.inf)
    if n < 2:
        return best
    ys = y[idx]
    total_pos = ys.sum()
    parent = float(_entropy(np.array([total_pos]), np.array([float(n)]))[0])
    left_n = np.arange(1, n, dtype=np.float64)
    right_n = n - left_n
    for f in features:
        v = X[idx, f]
        order = np.argsort(v, kind="stable")
        vs = v[order]
        left_pos = np.cumsum(ys[order])[:-1]
        ok = (vs[:-1] != vs[1:]) & (left_n >= min_leaf) & (right_n >= min_leaf)
        if not ok.any():
            continue
        child = (left_n * _entropy(left_pos, left_n) + right_n * _entropy(total_pos - left_pos, right_n)) / n
        gain = np.where(ok, parent - child, -np.inf)
        i = int(np.argmax(gain))
        if gain[i] > best[2]:
            best = (int(f), _threshold(vs[i], vs[i + 1]), float(gain[i]))
    return best


def best_split_gradient(X, g, h, idx, features, reg_lambda=0.0, min_leaf=1, min_child_weight=0.0):
    """Best second-order split: GL²/(HL+λ) + GR²/(HR+λ) − G²/(H+λ)."""
    idx = np.asarray(idx, dtype=np.intp)
    n = idx.size
    best = (-1, 0.0, -np.inf)
    if n < 2:
        return best
    gs, hs = g[idx], h[idx]
    G, H = gs.sum(), hs.sum()
    parent = G * G / (H + reg_lambda)
    left_n = np.arange(1, n)
    right_n = n - left_n
    for f in features:
        v = X[idx, f]
        order = np.argsort(v, kind="stable")
        vs = v[order]
        GL = np.cumsum(gs[order])[:-1]
        HL = np.cumsum(hs[order])[:-1]
        GR, HR = G - GL, H - HL
        ok = (
            (vs[:-1] != vs[1:])
            & (left_n >= min_leaf)
            & (right_n >= min_leaf)
            & (HL >= min_child_weight)
            & (HR >= min_child_weight)
        )
        if not ok.any():
            continue
        with np.errstate(divide="ignore", invalid="ignore"):
            gain = GL * GL / (HL + reg_lambda) + GR * GR / (HR + reg_lambda) - parent
        gain = np.where(ok, gain, -np.inf)
        i = int(np.argmax(gain))
        if gain[i] > best[2]:
            best = (int(f), _threshold(vs[i], vs[i + 1]), float(gain[i]))
    return best
