"""One-hidden-layer ReLU perceptron trained with Adam on log-loss."""
from __future__ import annotations

import numpy as np
from scipy.special import expit


def fit_mlp(
    X: np.ndarray,
    y: np.ndarray,
    rng: np.random.Generator,
    hidden: int = 100,
    epochs: int = 200,
    lr: float = 1e-3,
    alpha: float = 1e-4,
    batch_size: int = 200,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> dict[str, np.ndarray]:
    n, d = X.shape
    y = y.astype(np.float64)
    bound1 = np.sqrt(6.0 / (d + hidden))
    bound2 = np.sqrt(6.0 / (hidden + 1))
    params = {
        "W1": rng.uniform(-bound1, bound1, size=(d, hidden)),
        "b1": rng.uniform(-bound1, bound1, size=hidden),
        "W2": rng.uniform(-bound2, bound2, size=hidden),
        "b2": np.array([rng.uniform(-bound2, bound2)]),
    }
    m = {k: np.zeros_like(v) for k, v in params.items()}
    v = {k: np.zeros_like(p) for k, p in params.items()}
    bs = min(batch_size, n)
    t = 0
    for _ in range(epochs):
        order = rng.permutation(n)
        for start in range(0, n, bs):
            rows = order[start:start + bs]
            xb, yb = X[rows], y[rows]
            a1 = xb @ params["W1"] + params["b1"]
            h1 = np.maximum(a1, 0.0)
            out = expit(h1 @ params["W2"] + params["b2"][0])
            delta = (out - yb) / rows.size
            grads = {
                "W2": h1.T @ delta + alpha * params["W2"] / rows.size,
                "b2": np.array([delta.sum()]),
            }
            dh = np.outer(delta, params["W2"]) * (a1 > 0)
            grads["W1"] = xb.T @ dh + alpha * params["W1"] / rows.size
            grads["b1"] = dh.sum(axis=0)
            t += 1
            for k in params:
                m[k] = beta1 * m[k] + (1 - beta1) * grads[k]
                v[k] = beta2 * v[k] + (1 - beta2) * grads[k] ** 2
                step = lr * np.sqrt(1 - beta2**t) / (1 - beta1**t)
                params[k] = params[k] - step * m[k] / (np.sqrt(v[k]) + eps)
    return params


def mlp_proba(params: dict[str, np.ndarray], X: np.ndarray) -> np.ndarray:
    h1 = np.maximum(X @ params["W1"] + params["b1"], 0.0)
    return expit(h1 @ params["W2"] + params["b2"][0])
