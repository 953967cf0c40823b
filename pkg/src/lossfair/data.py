"""Dataset container, CSV ingestion, and the split/balance protocol.

A :class:`Dataset` is a dense design matrix with ±1 labels and a binary
sensitive attribute kept outside the feature columns.  The last feature
column is always the constant intercept.  CSV loading is schema-driven
(:class:`CsvSchema`): categorical columns are one-hot expanded, numeric
columns are standardized over the full loaded population by default, and
rows with missing values are dropped.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field, replace

import numpy as np
import pandas as pd


class DataError(Exception):
    """A data source could not be loaded or validated."""


@dataclass(frozen=True)
class Dataset:
    """Feature matrix (n, d) with labels in {-1, +1} and groups in {0, 1}.

    Invariants enforced at construction: float64 C-contiguous features
    whose last column is constantly 1, equal lengths, and binary
    labels/sensitive values.  Arrays are frozen read-only so a Dataset can
    be shared across solves without defensive copies.
    """

    features: np.ndarray
    labels: np.ndarray
    sensitive: np.ndarray
    name: str = ""
    feature_names: tuple[str, ...] | None = None

    def __post_init__(self):
        X = np.ascontiguousarray(self.features, dtype=np.float64)
        y = np.asarray(self.labels, dtype=np.int8)
        z = np.asarray(self.sensitive, dtype=np.int8)
        if X.ndim != 2:
            raise ValueError("features must be 2-dimensional")
        if y.ndim != 1 or z.ndim != 1:
            raise ValueError("labels and sensitive must be 1-dimensional")
        if not (X.shape[0] == y.shape[0] == z.shape[0]):
            raise ValueError("features, labels, sensitive must have equal length")
        if X.shape[0] == 0 or X.shape[1] == 0:
            raise ValueError("dataset must be non-empty")
        if not np.all(np.isfinite(X)):
            raise ValueError("features must be finite")
        if not np.all((y == 1) | (y == -1)):
            raise ValueError("labels must be +1 or -1")
        if not np.all((z == 0) | (z == 1)):
            raise ValueError("sensitive values must be 0 or 1")
        if not np.all(X[:, -1] == 1.0):
            raise ValueError("last feature column must be the constant intercept 1")
        if self.feature_names is not None and len(self.feature_names) != X.shape[1]:
            raise ValueError("feature_names length must match feature width")
        for arr in (X, y, z):
            arr.setflags(write=False)
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "labels", y)
        object.__setattr__(self, "sensitive", z)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    def subset(self, indices: np.ndarray, name: str | None = None) -> "Dataset":
        """Row subset in the given index order."""
        idx = np.asarray(indices)
        return Dataset(
            self.features[idx],
            self.labels[idx],
            self.sensitive[idx],
            name if name is not None else self.name,
            self.feature_names,
        )


@dataclass(frozen=True)
class SplitSpec:
    """Shuffled train/validation/test partition sizes.

    ``train_fraction`` is the share of the whole dataset left after the
    test cut; ``val_fraction`` is carved out of that share.  The default
    (0.70, 0.30) sends 30% to test, then 30% of the remainder to
    validation: N=6000 gives (2940, 1260, 1800).
    """

    train_fraction: float = 0.70
    val_fraction: float = 0.30
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.train_fraction < 1.0:
            raise ValueError("train_fraction must be in (0, 1)")
        if not 0.0 < self.val_fraction < 1.0:
            raise ValueError("val_fraction must be in (0, 1)")


def split(ds: Dataset, spec: SplitSpec) -> tuple[Dataset, Dataset, Dataset]:
    """Partition ``ds`` into (train, val, test) by a seeded permutation."""
    n = ds.n
    n_test = int(n * (1.0 - spec.train_fraction) + 0.5)
    n_rest = n - n_test
    n_val = int(n_rest * spec.val_fraction + 0.5)
    n_train = n_rest - n_val
    if min(n_train, n_val, n_test) < 1:
        raise ValueError(f"dataset of {n} rows is too small to split")
    perm = np.random.default_rng(spec.seed).permutation(n)
    return (
        ds.subset(perm[:n_train], f"{ds.name}:train"),
        ds.subset(perm[n_train : n_train + n_val], f"{ds.name}:val"),
        ds.subset(perm[n_train + n_val :], f"{ds.name}:test"),
    )


def balance_classes(ds: Dataset, seed: int = 0) -> Dataset:
    """Subsample the majority label class to match the minority count.

    Kept rows preserve their original order; sampling is without
    replacement with the given seed.  A dataset that is already balanced
    is returned unchanged.
    """
    pos = np.flatnonzero(ds.labels == 1)
    neg = np.flatnonzero(ds.labels == -1)
    if len(pos) == 0 or len(neg) == 0:
        raise ValueError("both label classes must be present to balance")
    if len(pos) == len(neg):
        return ds
    minority, majority = (pos, neg) if len(pos) < len(neg) else (neg, pos)
    rng = np.random.default_rng(seed)
    kept = rng.choice(majority, size=len(minority), replace=False)
    idx = np.sort(np.concatenate([minority, kept]))
    return ds.subset(idx, f"{ds.name}:balanced")


@dataclass(frozen=True)
class CsvSchema:
    """Column roles for CSV ingestion.

    ``positive_label`` maps to +1 (everything else to -1) and
    ``protected_value`` maps to sensitive value 0 (the other observed
    value to 1).  ``standardize`` rescales numeric columns to zero mean
    and unit variance over the full loaded population; per-split
    statistics can be applied instead via ``standardize=False`` plus
    :func:`standardize_columns` on the split results.
    """

    label_column: str
    positive_label: str
    sensitive_column: str
    protected_value: str
    numeric_columns: tuple[str, ...] = ()
    categorical_columns: tuple[str, ...] = ()
    drop_columns: tuple[str, ...] = ()
    standardize: bool = True
    missing_tokens: tuple[str, ...] = ("?", "", "NA")

    def __post_init__(self):
        object.__setattr__(self, "numeric_columns", tuple(self.numeric_columns))
        object.__setattr__(self, "categorical_columns", tuple(self.categorical_columns))
        object.__setattr__(self, "drop_columns", tuple(self.drop_columns))
        object.__setattr__(self, "missing_tokens", tuple(self.missing_tokens))
        feats = self.numeric_columns + self.categorical_columns
        if len(feats) == 0:
            raise ValueError("schema must name at least one feature column")
        if len(set(feats)) != len(feats):
            raise ValueError("feature columns must be distinct")
        for special in (self.label_column, self.sensitive_column):
            if special in feats:
                raise ValueError(f"column {special!r} cannot double as a feature")
        if self.label_column == self.sensitive_column:
            raise ValueError("label and sensitive columns must differ")
        overlap = set(self.drop_columns) & (
            set(feats) | {self.label_column, self.sensitive_column}
        )
        if overlap:
            raise ValueError(f"drop_columns overlap used columns: {sorted(overlap)}")

    @classmethod
    def from_file(cls, path) -> "CsvSchema":
        try:
            with open(path, encoding="utf-8") as fh:
                raw = json.load(fh)
        except OSError as exc:
            raise DataError(f"cannot read schema file {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise DataError(f"schema file {path} is not valid JSON: {exc}") from exc
        if not isinstance(raw, dict):
            raise DataError(f"schema file {path} must hold a JSON object")
        known = {
            "label_column", "positive_label", "sensitive_column", "protected_value",
            "numeric_columns", "categorical_columns", "drop_columns",
            "standardize", "missing_tokens",
        }
        unknown = set(raw) - known
        if unknown:
            raise DataError(f"schema file {path} has unknown keys: {sorted(unknown)}")
        try:
            return cls(**{k: tuple(v) if isinstance(v, list) else v for k, v in raw.items()})
        except (TypeError, ValueError) as exc:
            raise DataError(f"schema file {path} is invalid: {exc}") from exc

    def to_file(self, path) -> None:
        doc = {
            "label_column": self.label_column,
            "positive_label": self.positive_label,
            "sensitive_column": self.sensitive_column,
            "protected_value": self.protected_value,
            "numeric_columns": list(self.numeric_columns),
            "categorical_columns": list(self.categorical_columns),
            "drop_columns": list(self.drop_columns),
            "standardize": self.standardize,
            "missing_tokens": list(self.missing_tokens),
        }
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True)
            fh.write("\n")


def load_csv(path, schema: CsvSchema, name: str | None = None) -> Dataset:
    """Load a CSV file into a Dataset according to ``schema``.

    Rows containing a missing token in any used column are dropped.
    Categorical columns expand to one indicator column per observed
    level; numeric columns are standardized when the schema asks for it.
    """
    try:
        frame = pd.read_csv(path, dtype=str, skipinitialspace=True, keep_default_na=False)
    except OSError as exc:
        raise DataError(f"cannot read data file {path}: {exc}") from exc
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as exc:
        raise DataError(f"cannot parse CSV file {path}: {exc}") from exc

    used = [schema.label_column, schema.sensitive_column]
    used += list(schema.numeric_columns) + list(schema.categorical_columns)
    missing_cols = [c for c in used + list(schema.drop_columns) if c not in frame.columns]
    if missing_cols:
        raise DataError(f"{path}: columns not present in CSV: {missing_cols}")

    frame = frame[used].apply(lambda col: col.str.strip())
    keep = ~frame.isin(schema.missing_tokens).any(axis=1)
    frame = frame.loc[keep]
    if len(frame) == 0:
        raise DataError(f"{path}: no rows remain after dropping missing values")

    labels = np.where(frame[schema.label_column] == schema.positive_label, 1, -1)
    if not (labels == 1).any() or not (labels == -1).any():
        raise DataError(
            f"{path}: need both label classes; positive label is"
            f" {schema.positive_label!r}"
        )

    z_values = sorted(frame[schema.sensitive_column].unique())
    if len(z_values) != 2:
        raise DataError(
            f"{path}: sensitive column {schema.sensitive_column!r} must take exactly"
            f" two values, found {z_values}"
        )
    if schema.protected_value not in z_values:
        raise DataError(
            f"{path}: protected value {schema.protected_value!r} not among {z_values}"
        )
    sensitive = np.where(frame[schema.sensitive_column] == schema.protected_value, 0, 1)

    blocks: list[np.ndarray] = []
    names: list[str] = []
    for col in schema.categorical_columns:
        levels = sorted(frame[col].unique())
        if len(levels) < 2:
            raise DataError(f"{path}: column {col!r} has a single value after filtering")
        for level in levels:
            blocks.append((frame[col] == level).to_numpy(dtype=np.float64))
            names.append(f"{col}={level}")
    for col in schema.numeric_columns:
        try:
            # numpy's parser round-trips repr output exactly; pandas' does not
            values = frame[col].to_numpy(dtype=np.str_).astype(np.float64)
        except (ValueError, TypeError) as exc:
            raise DataError(f"{path}: column {col!r} is not numeric: {exc}") from exc
        if schema.standardize:
            std = values.std()
            if std == 0.0:
                raise DataError(f"{path}: column {col!r} has zero variance")
            values = (values - values.mean()) / std
        blocks.append(values)
        names.append(col)
    blocks.append(np.ones(len(frame)))
    names.append("__intercept__")

    return Dataset(
        np.column_stack(blocks),
        labels,
        sensitive,
        name if name is not None else str(path),
        tuple(names),
    )


def standardize_columns(
    fit_on: Dataset, datasets: tuple[Dataset, ...], columns: tuple[int, ...]
) -> tuple[Dataset, ...]:
    """Rescale the given feature columns using ``fit_on`` statistics.

    The per-split alternative to the loader's full-population default:
    load with ``standardize=False``, split, then fit on the training
    portion and apply everywhere.
    """
    cols = list(columns)
    if any(c == fit_on.dim - 1 or c >= fit_on.dim for c in cols):
        raise ValueError("cannot standardize the intercept or out-of-range columns")
    mean = fit_on.features[:, cols].mean(axis=0)
    std = fit_on.features[:, cols].std(axis=0)
    if np.any(std == 0.0):
        raise ValueError("zero-variance column in standardization fit")
    out = []
    for ds in datasets:
        X = ds.features.copy()
        X[:, cols] = (X[:, cols] - mean) / std
        out.append(replace(ds, features=X))
    return tuple(out)


def export_csv(ds: Dataset, path) -> None:
    """Write a Dataset as CSV with columns x1..xk, z, y (full precision)."""
    k = ds.dim - 1
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([f"x{j + 1}" for j in range(k)] + ["z", "y"])
        for i in range(ds.n):
            row = [repr(float(v)) for v in ds.features[i, :k]]
            writer.writerow(row + [int(ds.sensitive[i]), int(ds.labels[i])])


def roundtrip_schema(ds: Dataset) -> CsvSchema:
    """Schema that reads a file written by :func:`export_csv` back as-is."""
    return CsvSchema(
        label_column="y",
        positive_label="1",
        sensitive_column="z",
        protected_value="0",
        numeric_columns=tuple(f"x{j + 1}" for j in range(ds.dim - 1)),
        standardize=False,
    )
