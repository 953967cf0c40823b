"""Numpy implementation of the logistic loss kernels.

This is the fallback backend used when the compiled extension is not
available; see :mod:`lossfair.kernels` for the dispatch logic.  Both
backends compute

    f(theta) = (1/n) sum_i log(1 + exp(-y_i * x_i . theta)) + lam * ||w||^2

where ``w`` is ``theta`` without its trailing intercept coordinate.  The
intercept is excluded from the penalty so that constraint-driven bias
shifts are not fought by the regularizer.
"""

import numpy as np

BACKEND = "python"


def _stable_sigmoid(t):
    # 1 / (1 + exp(-t)) without overflow for large |t|
    out = np.empty_like(t)
    pos = t >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-t[pos]))
    e = np.exp(t[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def loss_value(X, y, theta, lam):
    """Regularized mean logistic loss at ``theta``."""
    margins = y * (X @ theta)
    w = theta[:-1]
    return float(np.mean(np.logaddexp(0.0, -margins)) + lam * (w @ w))


def loss_grad(X, y, theta, lam):
    """Loss and its gradient at ``theta``, sharing the margin pass."""
    margins = y * (X @ theta)
    w = theta[:-1]
    value = float(np.mean(np.logaddexp(0.0, -margins)) + lam * (w @ w))
    # d/dm log(1 + exp(-m)) = -sigmoid(-m)
    s = _stable_sigmoid(-margins)
    grad = -(X.T @ (s * y)) / X.shape[0]
    grad[:-1] += 2.0 * lam * w
    return value, grad
