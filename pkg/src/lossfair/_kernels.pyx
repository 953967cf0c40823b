# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled logistic loss kernels.

Same contract as lossfair._kernels_py: fused margin/loss/gradient passes
over a C-contiguous design matrix whose last column is the intercept.
The loss accumulator is Kahan-compensated so the compiled and numpy
backends agree to near machine precision even for large n.
"""

import numpy as np

from libc.math cimport exp, fabs, log1p

BACKEND = "compiled"


def loss_value(const double[:, ::1] X, const double[::1] y, const double[::1] theta, double lam):
    """Regularized mean logistic loss at ``theta``."""
    cdef Py_ssize_t n = X.shape[0]
    cdef Py_ssize_t d = X.shape[1]
    cdef Py_ssize_t i, j
    cdef double m, t, term, comp = 0.0, acc = 0.0, yk, tk, reg = 0.0
    for i in range(n):
        m = 0.0
        for j in range(d):
            m += X[i, j] * theta[j]
        t = y[i] * m
        term = log1p(exp(-fabs(t)))
        if t < 0.0:
            term -= t
        yk = term - comp
        tk = acc + yk
        comp = (tk - acc) - yk
        acc = tk
    for j in range(d - 1):
        reg += theta[j] * theta[j]
    return acc / n + lam * reg


def loss_grad(const double[:, ::1] X, const double[::1] y, const double[::1] theta, double lam):
    """Loss and its gradient at ``theta``, sharing the margin pass."""
    cdef Py_ssize_t n = X.shape[0]
    cdef Py_ssize_t d = X.shape[1]
    grad_arr = np.zeros(d, dtype=np.float64)
    cdef double[::1] grad = grad_arr
    cdef Py_ssize_t i, j
    cdef double m, t, term, comp = 0.0, acc = 0.0, yk, tk
    cdef double s, e, coef, reg = 0.0
    for i in range(n):
        m = 0.0
        for j in range(d):
            m += X[i, j] * theta[j]
        t = y[i] * m
        term = log1p(exp(-fabs(t)))
        if t < 0.0:
            term -= t
        yk = term - comp
        tk = acc + yk
        comp = (tk - acc) - yk
        acc = tk
        # sigmoid(-t) without overflow
        if t >= 0.0:
            e = exp(-t)
            s = e / (1.0 + e)
        else:
            s = 1.0 / (1.0 + exp(t))
        coef = -s * y[i]
        for j in range(d):
            grad[j] += coef * X[i, j]
    for j in range(d):
        grad[j] /= n
    for j in range(d - 1):
        reg += theta[j] * theta[j]
        grad[j] += 2.0 * lam * theta[j]
    return acc / n + lam * reg, grad_arr
