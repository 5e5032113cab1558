"""Elastic-net logistic regression fitted by proximal gradient descent.

Objective on standardized columns Z with unpenalized intercept b::

    F(w, b) = mean(log(1 + exp(z)) - y z) + lam * (alpha |w|_1 + (1 - alpha)/2 |w|^2),
    z = Z w + b
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class NonFiniteError(FloatingPointError):
    pass


def standardize_stats(X):
    mean = X.mean(axis=0)
    sd = X.std(axis=0, ddof=0)
    sd = np.where(sd > 1e-12, sd, 1.0)
    return mean, sd


def _logloss(z, y):
    # log(1 + e^z) - y z, stable for both signs
    return np.mean(np.logaddexp(0.0, z) - y * z)


def _sigmoid(z):
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def smooth_objective(w, b, Z, y, lam, alpha):
    return _logloss(Z @ w + b, y) + 0.5 * lam * (1.0 - alpha) * float(w @ w)


def smooth_gradient(w, b, Z, y, lam, alpha):
    r = (_sigmoid(Z @ w + b) - y) / y.size
    return Z.T @ r + lam * (1.0 - alpha) * w, float(r.sum())


def objective(w, b, Z, y, lam, alpha) -> float:
    return smooth_objective(w, b, Z, y, lam, alpha) + lam * alpha * float(np.abs(w).sum())


def gradient(w, b, Z, y, lam, alpha):
    """Gradient of the full objective where it is differentiable (all w_j != 0)."""
    gw, gb = smooth_gradient(w, b, Z, y, lam, alpha)
    return gw + lam * alpha * np.sign(w), gb


def soft_threshold(v, t):
    return np.sign(v) * np.maximum(np.abs(v) - t, 0.0)


@dataclass
class LogRegFit:
    weights: np.ndarray       # on standardized columns
    intercept: float
    mean: np.ndarray
    scale: np.ndarray
    n_iter: int
    objective: float
    converged: bool
    history: np.ndarray       # objective after each accepted step

    def logit(self, X):
        return ((X - self.mean) / self.scale) @ self.weights + self.intercept

    def predict(self, X):
        return _sigmoid(self.logit(X))


def fit_logreg_en(X, y, lam=0.01, alpha=0.5, max_iter=1000, tol=1e-6,
                  step0=1.0) -> LogRegFit:
    """ISTA with backtracking on the smooth part; monotone in the objective.

    Stops when the norm of the gradient map ``(theta - prox(theta - t grad)) / t``
    drops below ``tol`` or after ``max_iter`` accepted steps.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    mean, scale = standardize_stats(X)
    Z = (X - mean) / scale
    prev = np.clip(y.mean(), 1e-6, 1 - 1e-6)
    w = np.zeros(Z.shape[1])
    b = float(np.log(prev / (1 - prev)))
    l1 = lam * alpha
    t = step0
    f = smooth_objective(w, b, Z, y, lam, alpha)
    history = [f + l1 * np.abs(w).sum()]
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        gw, gb = smooth_gradient(w, b, Z, y, lam, alpha)
        while True:
            w_new = soft_threshold(w - t * gw, t * l1)
            b_new = b - t * gb
            dw, db = w_new - w, b_new - b
            f_new = smooth_objective(w_new, b_new, Z, y, lam, alpha)
            quad = f + gw @ dw + gb * db + (dw @ dw + db * db) / (2 * t)
            if f_new <= quad + 1e-15 * max(1.0, abs(f)):
                break
            t *= 0.5
            if t < 1e-20:
                raise NonFiniteError("backtracking failed to find a step")
        if not np.isfinite(f_new):
            raise NonFiniteError("logistic loss diverged")
        gmap = np.sqrt(dw @ dw + db * db) / t
        w, b, f = w_new, b_new, f_new
        history.append(f + l1 * np.abs(w).sum())
        if gmap < tol:
            converged = True
            break
        t *= 2.0   # let the step grow back
    return LogRegFit(w, b, mean, scale, it, history[-1], converged, np.asarray(history))
