"""L2-regularized logistic regression fitted by damped Newton iterations."""
from __future__ import annotations

import numpy as np
from scipy.special import expit


def logistic_loss_and_grad(params: np.ndarray, X: np.ndarray, y: np.ndarray, C: float = 1.0):
    """Objective ``0.5·‖w‖² + C·Σ logloss`` and its gradient.

    ``params`` is ``[w..., b]``; the intercept is not penalized.
    """
    w, b = params[:-1], params[-1]
    z = X @ w + b
    # log(1 + e^z) − y·z, computed stably
    loss = C * np.sum(np.logaddexp(0.0, z) - y * z) + 0.5 * w @ w
    r = C * (expit(z) - y)
    grad = np.concatenate([X.T @ r + w, [r.sum()]])
    return float(loss), grad


def fit_logistic(X: np.ndarray, y: np.ndarray, C: float = 1.0, tol: float = 1e-6, max_iter: int = 1000):
    """Return ``(coef, intercept, n_iter)`` minimizing :func:`logistic_loss_and_grad`."""
    n, d = X.shape
    params = np.zeros(d + 1)
    loss, grad = logistic_loss_and_grad(params, X, y, C)
    Xa = np.hstack([X, np.ones((n, 1))])
    reg = np.eye(d + 1)
    reg[-1, -1] = 0.0
    it = 0
    for it in range(1, max_iter + 1):
        if np.linalg.norm(grad) < tol:
            it -= 1
            break
        p = expit(Xa @ params)
        H = C * (Xa.T * (p * (1 - p))) @ Xa + reg + 1e-12 * np.eye(d + 1)
        try:
            step = np.linalg.solve(H, grad)
        except np.linalg.LinAlgError:
            step = grad
        t = 1.0
        while t > 1e-10:
            cand = params - t * step
            cand_loss, cand_grad = logistic_loss_and_grad(cand, X, y, C)
            if cand_loss <= loss - 1e-4 * t * grad @ step:
                break
            t *= 0.5
        else:
            break
        params, loss, grad = cand, cand_loss, cand_grad
    return params[:-1].copy(), float(params[-1]), it
