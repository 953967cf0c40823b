"""Backend dispatch for the logistic loss kernels.

At import time this module picks the compiled Cython extension when it is
importable and falls back to the numpy implementation otherwise.  Setting
the environment variable ``LOSSFAIR_PURE_PYTHON=1`` forces the fallback,
which is how the two backends are compared in tests and benchmarks.

Both backends expose the same two functions:

``loss_value(X, y, theta, lam)``
    Regularized mean logistic loss.  The trailing column of ``X`` is the
    intercept and its coordinate of ``theta`` is excluded from the
    penalty.

``loss_grad(X, y, theta, lam)``
    Tuple of (loss, gradient).
"""

import os

import numpy as np

from . import _kernels_py

if os.environ.get("LOSSFAIR_PURE_PYTHON") == "1":
    _impl = _kernels_py
else:
    try:
        from . import _kernels as _impl  # type: ignore[no-redef]
    except ImportError:
        _impl = _kernels_py

BACKEND = _impl.BACKEND


def _as_inputs(X, y, theta):
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    theta = np.ascontiguousarray(theta, dtype=np.float64)
    if X.ndim != 2 or y.ndim != 1 or theta.ndim != 1:
        raise ValueError("expected X (n, d), y (n,), theta (d,)")
    if X.shape[0] != y.shape[0] or X.shape[1] != theta.shape[0]:
        raise ValueError(
            f"shape mismatch: X {X.shape}, y {y.shape}, theta {theta.shape}"
        )
    return X, y, theta


def loss_value(X, y, theta, lam):
    X, y, theta = _as_inputs(X, y, theta)
    return float(_impl.loss_value(X, y, theta, float(lam)))


def loss_grad(X, y, theta, lam):
    X, y, theta = _as_inputs(X, y, theta)
    value, grad = _impl.loss_grad(X, y, theta, float(lam))
    return float(value), np.asarray(grad)
