"""Benefit rates, disparity, accuracy, and the covariance proxy.

A model's benefit for a group is the empirical rate of positive
predictions over that group (acceptance rate) or over the group's true
positives (true positive rate).  The covariance proxy is the linear
surrogate that stands in for benefit-rate equality inside the
constrained training problems.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .data import Dataset


@dataclass(frozen=True)
class LinearModel:
    """Classifier weights; the intercept rides on the constant column."""

    theta: np.ndarray

    def __post_init__(self):
        theta = np.ascontiguousarray(self.theta, dtype=np.float64)
        if theta.ndim != 1 or theta.shape[0] == 0:
            raise ValueError("theta must be a non-empty vector")
        if not np.all(np.isfinite(theta)):
            raise ValueError("theta must be finite")
        theta.setflags(write=False)
        object.__setattr__(self, "theta", theta)

    @property
    def dim(self) -> int:
        return self.theta.shape[0]


class BenefitKind(enum.Enum):
    """Which beneficial-outcome rate a constraint or report refers to."""

    ACCEPTANCE_RATE = "acceptance-rate"
    TRUE_POSITIVE_RATE = "true-positive-rate"

    @classmethod
    def parse(cls, text: str) -> "BenefitKind":
        aliases = {
            "acceptance-rate": cls.ACCEPTANCE_RATE,
            "ar": cls.ACCEPTANCE_RATE,
            "sp": cls.ACCEPTANCE_RATE,
            "statistical-parity": cls.ACCEPTANCE_RATE,
            "true-positive-rate": cls.TRUE_POSITIVE_RATE,
            "tpr": cls.TRUE_POSITIVE_RATE,
            "eop": cls.TRUE_POSITIVE_RATE,
            "equality-of-opportunity": cls.TRUE_POSITIVE_RATE,
        }
        key = text.strip().lower()
        if key not in aliases:
            raise ValueError(f"unknown benefit kind {text!r}")
        return aliases[key]


def _check_dim(model: LinearModel, dim: int) -> None:
    if model.dim != dim:
        raise ValueError(f"model dimension {model.dim} != feature width {dim}")


def signed_distance(model: LinearModel, x) -> float:
    """Signed distance from one point to the decision boundary."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (model.dim,):
        raise ValueError(f"point shape {x.shape} != ({model.dim},)")
    return float(x @ model.theta)


def signed_distances(model: LinearModel, ds: Dataset) -> np.ndarray:
    """Signed distances for every row of ``ds``."""
    _check_dim(model, ds.dim)
    return ds.features @ model.theta


def predict(model: LinearModel, ds: Dataset) -> np.ndarray:
    """±1 predictions; boundary ties go to +1."""
    return np.where(signed_distances(model, ds) >= 0.0, 1, -1).astype(np.int8)


def _benefit_mask(ds: Dataset, kind: BenefitKind, group: int) -> np.ndarray:
    if group not in (0, 1):
        raise ValueError("group must be 0 or 1")
    mask = ds.sensitive == group
    if kind is BenefitKind.TRUE_POSITIVE_RATE:
        mask &= ds.labels == 1
    return mask


def benefit(model: LinearModel, ds: Dataset, kind: BenefitKind, group: int) -> float:
    """Positive-prediction rate over the group's conditioning subset."""
    mask = _benefit_mask(ds, kind, group)
    if not mask.any():
        raise ValueError(f"no rows for kind={kind.value}, group={group}")
    return float((predict(model, ds)[mask] == 1).mean())


def accuracy(model: LinearModel, ds: Dataset) -> float:
    """Fraction of rows predicted correctly."""
    return float((predict(model, ds) == ds.labels).mean())


def disparity(model: LinearModel, ds: Dataset, kind: BenefitKind) -> float:
    """Absolute gap between the two group benefits."""
    return abs(benefit(model, ds, kind, 0) - benefit(model, ds, kind, 1))


def proxy_rows(ds: Dataset, kind: BenefitKind) -> np.ndarray:
    """Boolean mask of the proxy's summation set: all rows or positives."""
    if kind is BenefitKind.TRUE_POSITIVE_RATE:
        return ds.labels == 1
    return np.ones(ds.n, dtype=bool)


def covariance_proxy(model: LinearModel, ds: Dataset, kind: BenefitKind) -> float:
    """Empirical covariance of the sensitive attribute and signed distance.

    Computed over all rows for acceptance rate and over positives for
    true positive rate; z is centered on the same summation set.
    """
    mask = proxy_rows(ds, kind)
    if not mask.any():
        raise ValueError("empty summation set for covariance proxy")
    z = ds.sensitive[mask].astype(np.float64)
    d = signed_distances(model, ds)[mask]
    return float(np.mean((z - z.mean()) * d))


def group_mean_distance(
    model: LinearModel, ds: Dataset, kind: BenefitKind, group: int
) -> float:
    """Mean signed distance over the group's conditioning subset.

    This is the quantity the loss-averse constraints put a floor under.
    """
    mask = _benefit_mask(ds, kind, group)
    if not mask.any():
        raise ValueError(f"no rows for kind={kind.value}, group={group}")
    return float(signed_distances(model, ds)[mask].mean())
