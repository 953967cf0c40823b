"""Affine constraint rows for the constrained training problems.

Every constraint is a row ``a . theta <= b``.  Two families exist:

* covariance caps: |proxy(theta)| <= c, linearized as the pair
  v . theta <= c and -v . theta <= c, where v is the centered-group
  feature average over the proxy's summation set;

* loss-averse floors: per group k, mean signed distance under the new
  model must reach the status-quo mean plus a margin gamma, i.e.
  -u_k . theta <= -(r_k + gamma).

``c = inf`` is the documented sentinel for "no covariance cap" and
yields an empty set, so the unconstrained pipeline needs no special
case.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .data import Dataset
from .metrics import BenefitKind, LinearModel, proxy_rows


@dataclass(frozen=True)
class AffineConstraint:
    """One row: a . theta <= b."""

    a: np.ndarray
    b: float
    tag: str = ""

    def __post_init__(self):
        a = np.ascontiguousarray(self.a, dtype=np.float64)
        if a.ndim != 1 or a.shape[0] == 0:
            raise ValueError("coefficient vector must be non-empty")
        if not np.all(np.isfinite(a)) or not math.isfinite(self.b):
            raise ValueError("constraint coefficients must be finite")
        a.setflags(write=False)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", float(self.b))

    def violation(self, theta: np.ndarray) -> float:
        """a . theta - b; positive means violated."""
        return float(self.a @ theta - self.b)


@dataclass(frozen=True)
class ConstraintSet:
    """Immutable collection of rows sharing one dimension."""

    rows: tuple[AffineConstraint, ...] = ()

    def __post_init__(self):
        rows = tuple(self.rows)
        dims = {r.a.shape[0] for r in rows}
        if len(dims) > 1:
            raise ValueError(f"mixed constraint dimensions: {sorted(dims)}")
        object.__setattr__(self, "rows", rows)

    def __len__(self) -> int:
        return len(self.rows)

    def __iter__(self):
        return iter(self.rows)

    def __add__(self, other: "ConstraintSet") -> "ConstraintSet":
        return ConstraintSet(self.rows + other.rows)

    @property
    def dim(self) -> int:
        if not self.rows:
            raise ValueError("empty constraint set has no dimension")
        return self.rows[0].a.shape[0]

    def matrix(self) -> tuple[np.ndarray, np.ndarray]:
        """Stacked (A, b) with one row per constraint."""
        if not self.rows:
            raise ValueError("empty constraint set has no matrix form")
        A = np.stack([r.a for r in self.rows])
        b = np.array([r.b for r in self.rows])
        return A, b

    def max_violation(self, theta: np.ndarray) -> float:
        """Largest row violation at ``theta``; 0 for an empty set."""
        if not self.rows:
            return 0.0
        A, b = self.matrix()
        return float(np.max(A @ theta - b, initial=0.0))


def _proxy_vector(ds: Dataset, kind: BenefitKind) -> np.ndarray:
    mask = proxy_rows(ds, kind)
    if not mask.any():
        raise ValueError("empty summation set for covariance constraint")
    z = ds.sensitive[mask].astype(np.float64)
    if z.min() == z.max():
        raise ValueError("both groups must appear in the summation set")
    centered = z - z.mean()
    return (centered[:, None] * ds.features[mask]).mean(axis=0)


def _covariance_cap(ds: Dataset, c: float, kind: BenefitKind, label: str) -> ConstraintSet:
    if math.isnan(c) or c < 0:
        raise ValueError("covariance threshold must be >= 0 (inf for none)")
    if math.isinf(c):
        return ConstraintSet(())
    v = _proxy_vector(ds, kind)
    return ConstraintSet(
        (
            AffineConstraint(v, c, f"{label}-cov-upper"),
            AffineConstraint(-v, c, f"{label}-cov-lower"),
        )
    )


def sp_constraint(ds: Dataset, c: float) -> ConstraintSet:
    """Cap |covariance proxy| over all rows (acceptance-rate parity)."""
    return _covariance_cap(ds, c, BenefitKind.ACCEPTANCE_RATE, "ar")


def eop_constraint(ds: Dataset, c: float) -> ConstraintSet:
    """Cap |covariance proxy| over positives (true-positive-rate parity)."""
    return _covariance_cap(ds, c, BenefitKind.TRUE_POSITIVE_RATE, "tpr")


def _loss_averse(
    ds: Dataset, theta_sqo: LinearModel, gamma: float, kind: BenefitKind, label: str
) -> ConstraintSet:
    if math.isnan(gamma) or math.isinf(gamma) or gamma < 0:
        raise ValueError("gamma must be finite and >= 0")
    if theta_sqo.dim != ds.dim:
        raise ValueError("status-quo model dimension mismatch")
    mask = proxy_rows(ds, kind)
    rows = []
    for group in (0, 1):
        sel = mask & (ds.sensitive == group)
        if not sel.any():
            raise ValueError(f"no rows for group {group} in loss-averse constraint")
        u = ds.features[sel].mean(axis=0)
        floor = float(u @ theta_sqo.theta) + gamma
        rows.append(AffineConstraint(-u, -floor, f"{label}-floor-z{group}"))
    return ConstraintSet(tuple(rows))


def loss_averse_ar(ds: Dataset, theta_sqo: LinearModel, gamma: float) -> ConstraintSet:
    """Floor each group's mean signed distance at the status quo's + gamma."""
    return _loss_averse(ds, theta_sqo, gamma, BenefitKind.ACCEPTANCE_RATE, "ar")


def loss_averse_tpr(ds: Dataset, theta_sqo: LinearModel, gamma: float) -> ConstraintSet:
    """Same floor, taken over each group's positive rows only."""
    return _loss_averse(ds, theta_sqo, gamma, BenefitKind.TRUE_POSITIVE_RATE, "tpr")


def covariance_cap(ds: Dataset, kind: BenefitKind, c: float) -> ConstraintSet:
    """Kind-dispatched covariance cap."""
    if kind is BenefitKind.ACCEPTANCE_RATE:
        return sp_constraint(ds, c)
    return eop_constraint(ds, c)


def loss_averse(
    ds: Dataset, kind: BenefitKind, theta_sqo: LinearModel, gamma: float
) -> ConstraintSet:
    """Kind-dispatched loss-averse floors."""
    if kind is BenefitKind.ACCEPTANCE_RATE:
        return loss_averse_ar(ds, theta_sqo, gamma)
    return loss_averse_tpr(ds, theta_sqo, gamma)
