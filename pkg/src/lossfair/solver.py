"""Constrained minimization of the regularized logistic objective.

The solver is purpose-built for this problem class: a smooth strictly
convex objective with a handful of affine inequality rows.  It runs in
three phases:

1. a feasibility phase that finds a point satisfying every row (or
   certifies that none exists within tolerance),
2. an augmented-Lagrangian outer loop whose inner subproblems are solved
   by a limited-memory BFGS with a strong-Wolfe line search,
3. an active-set Newton polish that converges the iterate and its
   multipliers far enough to certify the KKT conditions at the
   tolerances recorded in the SolveReport.

Reports are deterministic functions of their inputs; no randomness is
used anywhere.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from . import kernels
from .constraints import ConstraintSet
from .data import Dataset
from .metrics import LinearModel


class SolveStatus(enum.Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    ITERATION_LIMIT = "IterationLimit"


@dataclass(frozen=True)
class SolveOptions:
    """Tolerances and iteration budgets for one solve."""

    kkt_tolerance: float = 1e-6
    feasibility_tolerance: float = 1e-6
    max_outer_iterations: int = 200
    max_inner_iterations: int = 500
    penalty_growth: float = 10.0

    def __post_init__(self):
        if self.kkt_tolerance <= 0 or self.feasibility_tolerance <= 0:
            raise ValueError("tolerances must be positive")
        if self.max_outer_iterations <= 0 or self.max_inner_iterations <= 0:
            raise ValueError("iteration limits must be positive")
        if self.penalty_growth <= 1.0:
            raise ValueError("penalty_growth must exceed 1")


@dataclass(frozen=True)
class SolveReport:
    """Outcome of one constrained solve.

    ``kkt_residual`` is the larger of the stationarity and complementary
    slackness residuals (infinity unless status is Optimal);
    ``multipliers`` holds one value per constraint row in input order.
    """

    theta: LinearModel
    objective: float
    status: SolveStatus
    kkt_residual: float
    max_constraint_violation: float
    multipliers: np.ndarray

    def __post_init__(self):
        mu = np.asarray(self.multipliers, dtype=np.float64)
        mu.setflags(write=False)
        object.__setattr__(self, "multipliers", mu)


def objective(ds: Dataset, theta, lam: float) -> float:
    """Regularized mean logistic loss; the intercept is unpenalized."""
    theta = theta.theta if isinstance(theta, LinearModel) else theta
    if lam < 0:
        raise ValueError("lambda must be >= 0")
    return kernels.loss_value(ds.features, ds.labels, theta, lam)


def gradient(ds: Dataset, theta, lam: float) -> np.ndarray:
    """Analytic gradient of :func:`objective`."""
    theta = theta.theta if isinstance(theta, LinearModel) else theta
    if lam < 0:
        raise ValueError("lambda must be >= 0")
    return kernels.loss_grad(ds.features, ds.labels, theta, lam)[1]


def _hessian(X: np.ndarray, y: np.ndarray, theta: np.ndarray, lam: float) -> np.ndarray:
    t = y * (X @ theta)
    p = expit(t)
    w = p * (1.0 - p) / X.shape[0]
    H = (X * w[:, None]).T @ X
    H[np.arange(X.shape[1] - 1), np.arange(X.shape[1] - 1)] += 2.0 * lam
    return H


def _wolfe_search(fg, x, p, f0, g0, max_steps=30):
    """Strong Wolfe line search (bracket and zoom).

    Returns (alpha, f, g, x_new) or None when no acceptable step exists,
    which callers treat as a stall.
    """
    c1, c2 = 1e-4, 0.9
    d0 = float(g0 @ p)
    if d0 >= 0:
        return None

    def phi(alpha):
        xn = x + alpha * p
        f, g = fg(xn)
        return f, g, xn

    def zoom(lo, f_lo, hi, f_hi):
        for _ in range(40):
            alpha = 0.5 * (lo + hi)
            f_a, g_a, x_a = phi(alpha)
            if not math.isfinite(f_a) or f_a > f0 + c1 * alpha * d0 or f_a >= f_lo:
                hi, f_hi = alpha, f_a
            else:
                d_a = float(g_a @ p)
                if abs(d_a) <= -c2 * d0:
                    return alpha, f_a, g_a, x_a
                if d_a * (hi - lo) >= 0:
                    hi, f_hi = lo, f_lo
                lo, f_lo = alpha, f_a
            if abs(hi - lo) < 1e-16 * max(1.0, abs(lo)):
                break
        f_a, g_a, x_a = phi(lo)
        if math.isfinite(f_a) and f_a < f0:
            return lo, f_a, g_a, x_a
        return None

    alpha_prev, f_prev = 0.0, f0
    alpha = 1.0
    for step in range(max_steps):
        f_a, g_a, x_a = phi(alpha)
        if not math.isfinite(f_a) or f_a > f0 + c1 * alpha * d0 or (step > 0 and f_a >= f_prev):
            return zoom(alpha_prev, f_prev, alpha, f_a)
        d_a = float(g_a @ p)
        if abs(d_a) <= -c2 * d0:
            return alpha, f_a, g_a, x_a
        if d_a >= 0:
            return zoom(alpha, f_a, alpha_prev, f_prev)
        alpha_prev, f_prev = alpha, f_a
        alpha = min(2.0 * alpha, 1e12)
    return None


def _lbfgs(fg, x0, gtol, max_iter, memory=10):
    """Limited-memory BFGS; returns (x, f, g, iterations, converged)."""
    x = np.asarray(x0, dtype=np.float64).copy()
    f, g = fg(x)
    s_hist: list[np.ndarray] = []
    y_hist: list[np.ndarray] = []
    rho_hist: list[float] = []
    for it in range(max_iter):
        gnorm = float(np.max(np.abs(g)))
        if gnorm <= gtol:
            return x, f, g, it, True
        # two-loop recursion
        q = g.copy()
        alphas = []
        for s, yv, rho in zip(reversed(s_hist), reversed(y_hist), reversed(rho_hist)):
            a = rho * float(s @ q)
            alphas.append(a)
            q -= a * yv
        if y_hist:
            gamma = float(s_hist[-1] @ y_hist[-1]) / float(y_hist[-1] @ y_hist[-1])
            q *= gamma
        for (s, yv, rho), a in zip(zip(s_hist, y_hist, rho_hist), reversed(alphas)):
            beta = rho * float(yv @ q)
            q += (a - beta) * s
        p = -q
        if float(p @ g) >= 0.0:
            p = -g
        if not s_hist:
            p = p / max(1.0, float(np.linalg.norm(p)))
        result = _wolfe_search(fg, x, p, f, g)
        if result is None:
            # stall: retry once along steepest descent, then give up
            result = _wolfe_search(fg, x, -g, f, g)
            if result is None:
                return x, f, g, it, False
            s_hist, y_hist, rho_hist = [], [], []
        _, f_new, g_new, x_new = result
        s = x_new - x
        yv = g_new - g
        sy = float(s @ yv)
        if sy > 1e-10 * float(np.linalg.norm(s)) * float(np.linalg.norm(yv)):
            s_hist.append(s)
            y_hist.append(yv)
            rho_hist.append(1.0 / sy)
            if len(s_hist) > memory:
                s_hist.pop(0)
                y_hist.pop(0)
                rho_hist.pop(0)
        x, f, g = x_new, f_new, g_new
    return x, f, g, max_iter, float(np.max(np.abs(g))) <= gtol


def _feasible_start(A, b, x0, opts):
    """Minimize sum of squared violations; return (x, max_violation)."""
    row_scale = max(1.0, float(np.max(np.abs(A))))

    def fg(theta):
        r = A @ theta - b
        active = np.maximum(r, 0.0)
        return 0.5 * float(active @ active), A.T @ active

    x, _, _, _, _ = _lbfgs(fg, x0, gtol=1e-13 * row_scale, max_iter=2000)
    # Gauss-Newton cleanup: project onto the violated rows; handles
    # feasible sets of lower dimension where the quadratic tail stalls.
    for _ in range(25):
        r = A @ x - b
        viol = float(np.max(r, initial=0.0))
        if viol <= 0.5 * opts.feasibility_tolerance:
            break
        rows = r > -0.5 * opts.feasibility_tolerance
        dx, *_ = np.linalg.lstsq(A[rows], -r[rows], rcond=None)
        if float(np.linalg.norm(dx)) < 1e-15:
            break
        x = x + dx
    return x, float(np.max(A @ x - b, initial=0.0))


def _kkt_terms(X, y, lam, A, b, x, mu):
    f, g = kernels.loss_grad(X, y, x, lam)
    r = A @ x - b
    stationarity = float(np.max(np.abs(g + A.T @ mu)))
    complementarity = float(np.max(np.abs(mu * r), initial=0.0))
    violation = float(np.max(r, initial=0.0))
    return f, stationarity, complementarity, violation


def _polish(X, y, lam, A, b, x0, mu0, opts):
    """Active-set Newton refinement; returns (x, mu, ok)."""
    m, d = A.shape
    kkt_target = 0.3 * opts.kkt_tolerance
    feas_target = 0.3 * opts.feasibility_tolerance
    x = x0.copy()
    r = A @ x - b
    active = set(np.flatnonzero((mu0 > 1e-12) | (r > -1e-5 * np.maximum(1.0, np.abs(b)))))
    mu = np.zeros(m)
    for _ in range(60):
        rows = sorted(active)
        f, g = kernels.loss_grad(X, y, x, lam)
        H = _hessian(X, y, x, lam)
        if rows:
            Aact = A[rows]
            k = len(rows)
            kkt = np.zeros((d + k, d + k))
            kkt[:d, :d] = H
            kkt[:d, d:] = Aact.T
            kkt[d:, :d] = Aact
            rhs = np.concatenate([-g, -(Aact @ x - b[rows])])
            sol, *_ = np.linalg.lstsq(kkt, rhs, rcond=None)
            dx, mu_act = sol[:d], sol[d:]
        else:
            dx = -np.linalg.lstsq(H, g, rcond=None)[0]
            mu_act = np.zeros(0)
        if not np.all(np.isfinite(dx)) or float(np.linalg.norm(dx)) > 1e6 * (1.0 + float(np.linalg.norm(x))):
            return x, mu, False
        # drop the most negative multiplier before stepping
        if len(rows) and float(mu_act.min()) < -1e-9:
            active.discard(rows[int(np.argmin(mu_act))])
            continue
        x = x + dx
        mu = np.zeros(m)
        mu[rows] = np.maximum(mu_act, 0.0)
        r = A @ x - b
        # admit any row the step pushed into violation
        newly = set(np.flatnonzero(r > feas_target)) - active
        if newly:
            active |= newly
            continue
        _, stationarity, complementarity, violation = _kkt_terms(X, y, lam, A, b, x, mu)
        if stationarity <= kkt_target and complementarity <= kkt_target and violation <= opts.feasibility_tolerance:
            return x, mu, True
    return x, mu, False


def _newton_unconstrained(X, y, lam, x0, tol):
    x = x0.copy()
    f, g = kernels.loss_grad(X, y, x, lam)
    for _ in range(100):
        if float(np.max(np.abs(g))) <= tol:
            return x, True
        H = _hessian(X, y, x, lam)
        try:
            dx = -np.linalg.solve(H, g)
        except np.linalg.LinAlgError:
            dx = -np.linalg.lstsq(H, g, rcond=None)[0]
        step = 1.0
        for _ in range(40):
            f_new, g_new = kernels.loss_grad(X, y, x + step * dx, lam)
            if f_new <= f + 1e-4 * step * float(g @ dx):
                break
            step *= 0.5
        x = x + step * dx
        f, g = f_new, g_new
    return x, float(np.max(np.abs(g))) <= tol


def _trace_line(trace, payload):
    if trace is not None:
        trace.write(json.dumps(payload) + "\n")


def minimize(
    ds: Dataset,
    lam: float,
    constraints: ConstraintSet | None = None,
    opts: SolveOptions | None = None,
    x0: np.ndarray | None = None,
    trace=None,
) -> SolveReport:
    """Minimize the regularized logistic loss subject to affine rows.

    ``x0`` warm-starts the iteration (the sweep harness chains solutions
    across covariance thresholds); ``trace`` accepts a writable text
    stream receiving one JSON line per outer iteration.
    """
    opts = opts or SolveOptions()
    constraints = constraints if constraints is not None else ConstraintSet(())
    if lam < 0:
        raise ValueError("lambda must be >= 0")
    X = ds.features
    y = np.ascontiguousarray(ds.labels, dtype=np.float64)
    d = ds.dim
    if len(constraints) and constraints.dim != d:
        raise ValueError(f"constraint dimension {constraints.dim} != feature width {d}")
    x = np.zeros(d) if x0 is None else np.asarray(x0, dtype=np.float64).copy()
    if x.shape != (d,):
        raise ValueError(f"x0 shape {x.shape} != ({d},)")

    if len(constraints) == 0:
        def fg(theta):
            return kernels.loss_grad(X, y, theta, lam)

        x, f, g, _, _ = _lbfgs(fg, x, gtol=max(1e-5, 10 * opts.kkt_tolerance), max_iter=opts.max_inner_iterations)
        x, ok = _newton_unconstrained(X, y, lam, x, 0.3 * opts.kkt_tolerance)
        f, g = kernels.loss_grad(X, y, x, lam)
        residual = float(np.max(np.abs(g)))
        status = SolveStatus.OPTIMAL if residual <= opts.kkt_tolerance else SolveStatus.ITERATION_LIMIT
        return SolveReport(
            theta=LinearModel(x),
            objective=f,
            status=status,
            kkt_residual=residual if status is SolveStatus.OPTIMAL else math.inf,
            max_constraint_violation=0.0,
            multipliers=np.zeros(0),
        )

    A, b = constraints.matrix()
    m = A.shape[0]

    x, start_violation = _feasible_start(A, b, x, opts)
    if start_violation > opts.feasibility_tolerance:
        f = kernels.loss_value(X, y, x, lam)
        _trace_line(trace, {"phase": "feasibility", "max_violation": start_violation})
        return SolveReport(
            theta=LinearModel(x),
            objective=f,
            status=SolveStatus.INFEASIBLE,
            kkt_residual=math.inf,
            max_constraint_violation=start_violation,
            multipliers=np.zeros(m),
        )

    mu = np.zeros(m)
    rho = opts.penalty_growth
    omega = 0.1
    eta = 0.5

    def make_fg(mu_k, rho_k):
        def fg(theta):
            f, g = kernels.loss_grad(X, y, theta, lam)
            r = A @ theta - b
            shifted = np.maximum(mu_k + rho_k * r, 0.0)
            f_pen = f + float(shifted @ shifted - mu_k @ mu_k) / (2.0 * rho_k)
            return f_pen, g + A.T @ shifted
        return fg

    best = None  # (violation, x, mu_hat) fallback for IterationLimit
    for outer in range(opts.max_outer_iterations):
        x, f_pen, g_pen, inner_iters, _ = _lbfgs(
            make_fg(mu, rho), x, gtol=omega, max_iter=opts.max_inner_iterations
        )
        r = A @ x - b
        mu_hat = np.maximum(mu + rho * r, 0.0)
        violation = float(np.max(r, initial=0.0))
        stationarity = float(np.max(np.abs(g_pen)))
        _trace_line(
            trace,
            {
                "outer": outer,
                "objective": kernels.loss_value(X, y, x, lam),
                "max_violation": violation,
                "stationarity": stationarity,
                "rho": rho,
                "inner_iterations": inner_iters,
            },
        )
        if best is None or violation < best[0]:
            best = (violation, x.copy(), mu_hat.copy())

        if violation <= 1e-3 and stationarity <= 1e-2:
            x_p, mu_p, ok = _polish(X, y, lam, A, b, x, mu_hat, opts)
            if ok:
                f, stat, comp, viol = _kkt_terms(X, y, lam, A, b, x_p, mu_p)
                return SolveReport(
                    theta=LinearModel(x_p),
                    objective=f,
                    status=SolveStatus.OPTIMAL,
                    kkt_residual=max(stat, comp),
                    max_constraint_violation=max(viol, 0.0),
                    multipliers=mu_p,
                )

        f, stat, comp, viol = _kkt_terms(X, y, lam, A, b, x, mu_hat)
        if stat <= opts.kkt_tolerance and comp <= opts.kkt_tolerance and viol <= opts.feasibility_tolerance:
            return SolveReport(
                theta=LinearModel(x),
                objective=f,
                status=SolveStatus.OPTIMAL,
                kkt_residual=max(stat, comp),
                max_constraint_violation=viol,
                multipliers=mu_hat,
            )

        if violation <= max(eta, opts.feasibility_tolerance):
            mu = mu_hat
            omega = max(omega / rho, 0.05 * opts.kkt_tolerance)
            eta = max(eta / rho**0.9, 0.05 * opts.feasibility_tolerance)
        else:
            rho *= opts.penalty_growth
            omega = max(1.0 / rho, 0.05 * opts.kkt_tolerance)
            eta = max(rho**-0.1, 0.05 * opts.feasibility_tolerance)

    violation, x, mu_hat = best
    x_p, mu_p, ok = _polish(X, y, lam, A, b, x, mu_hat, opts)
    if ok:
        f, stat, comp, viol = _kkt_terms(X, y, lam, A, b, x_p, mu_p)
        return SolveReport(
            theta=LinearModel(x_p),
            objective=f,
            status=SolveStatus.OPTIMAL,
            kkt_residual=max(stat, comp),
            max_constraint_violation=max(viol, 0.0),
            multipliers=mu_p,
        )
    f = kernels.loss_value(X, y, x, lam)
    return SolveReport(
        theta=LinearModel(x),
        objective=f,
        status=SolveStatus.ITERATION_LIMIT,
        kkt_residual=math.inf,
        max_constraint_violation=violation,
        multipliers=mu_hat,
    )
