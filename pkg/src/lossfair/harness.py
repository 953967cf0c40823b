"""Experiment sweep: seeds x covariance factors x two variants.

Per seed the harness regenerates (or re-splits) the data, selects
lambda, fits the status quo, computes the covariance unit c*, then for
every multiplicative factor m solves the nondiscriminatory-only and
loss-averse variants at c = m * c*.  Results land in plot-ready CSVs.

Aggregates follow the source protocol for excluding failed cells: the
nondiscriminatory curve averages Optimal cells, the loss-averse curve
averages cells that are Optimal and passed the validation gate, and
every aggregate records how many seeds contributed.
"""

from __future__ import annotations

import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__, kernels
from .data import CsvSchema, Dataset, DataError, SplitSpec, balance_classes, load_csv, split
from .metrics import BenefitKind, LinearModel, accuracy, benefit, disparity
from .solver import SolveOptions, SolveStatus
from .synthgen import SynthConfig, gen_eop_dataset, gen_sp_dataset
from .trainer import (
    AllGammaFailed,
    GammaGrid,
    LambdaGrid,
    compute_cstar,
    select_lambda,
    train_loss_averse,
    train_nondiscriminatory,
    train_status_quo,
)

VARIANT_NONDISC = "nondisc-only"
VARIANT_LOSS_AVERSE = "loss-averse"

SOURCES = ("synthetic-sp", "synthetic-eop", "csv")
_DEFAULT_N = {"synthetic-sp": 6000, "synthetic-eop": 16000}


class ConfigError(Exception):
    """An experiment configuration is malformed."""


@dataclass(frozen=True)
class ExperimentConfig:
    """Declarative description of one full sweep."""

    source: str
    kind: BenefitKind
    n: int | None = None
    phi: float = math.pi / 4
    csv_path: str | None = None
    schema: CsvSchema | None = None
    balance: bool = False
    m_values: tuple[float, ...] = (1.0, 0.8, 0.6, 0.4, 0.2, 0.1, 0.05, 0.0)
    seeds: tuple[int, ...] = (0, 1, 2, 3, 4)
    lambda_grid: LambdaGrid = field(default_factory=LambdaGrid)
    gamma_grid: GammaGrid = field(default_factory=GammaGrid)
    train_fraction: float = 0.70
    val_fraction: float = 0.30
    solve_options: SolveOptions = field(default_factory=SolveOptions)
    strict_gate: bool = False
    output_dir: str | None = None

    def __post_init__(self):
        if self.source not in SOURCES:
            raise ConfigError(f"unknown dataset source {self.source!r}")
        if self.source == "csv":
            if not self.csv_path or self.schema is None:
                raise ConfigError("csv source requires csv_path and schema")
        else:
            n = self.n if self.n is not None else _DEFAULT_N[self.source]
            if n <= 0:
                raise ConfigError("n must be positive")
            object.__setattr__(self, "n", n)
        m_values = tuple(float(m) for m in self.m_values)
        if len(m_values) == 0:
            raise ConfigError("m_values must be non-empty")
        if any(not 0.0 <= m <= 1.0 for m in m_values):
            raise ConfigError("m_values must lie in [0, 1]")
        if any(a <= b for a, b in zip(m_values, m_values[1:])):
            raise ConfigError("m_values must be strictly descending")
        object.__setattr__(self, "m_values", m_values)
        seeds = tuple(int(s) for s in self.seeds)
        if len(seeds) == 0:
            raise ConfigError("at least one seed is required")
        if len(set(seeds)) != len(seeds):
            raise ConfigError("seeds must be distinct")
        object.__setattr__(self, "seeds", seeds)
        if not 0.0 < self.train_fraction < 1.0 or not 0.0 < self.val_fraction < 1.0:
            raise ConfigError("split fractions must lie in (0, 1)")

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        try:
            with open(path, encoding="utf-8") as fh:
                raw = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigError(f"config {path} must hold a JSON object")
        known = {
            "dataset", "kind", "n", "phi", "csv_path", "schema", "balance",
            "m_values", "seeds", "lambda_grid", "gamma_grid",
            "train_fraction", "val_fraction", "solve_options", "strict_gate",
            "output_dir",
        }
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"config {path} has unknown keys: {sorted(unknown)}")
        if "dataset" not in raw or "kind" not in raw:
            raise ConfigError(f"config {path} needs 'dataset' and 'kind'")
        kwargs: dict = {"source": raw["dataset"]}
        try:
            kwargs["kind"] = BenefitKind.parse(str(raw["kind"]))
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        schema = raw.get("schema")
        if schema is not None:
            if isinstance(schema, str):
                base = Path(path).parent
                kwargs["schema"] = CsvSchema.from_file(
                    schema if Path(schema).is_absolute() else base / schema
                )
            elif isinstance(schema, dict):
                try:
                    kwargs["schema"] = CsvSchema(
                        **{k: tuple(v) if isinstance(v, list) else v for k, v in schema.items()}
                    )
                except (TypeError, ValueError) as exc:
                    raise ConfigError(f"inline schema is invalid: {exc}") from exc
            else:
                raise ConfigError("'schema' must be a path or an object")
        for key in ("n", "phi", "csv_path", "balance", "train_fraction",
                    "val_fraction", "strict_gate", "output_dir"):
            if key in raw:
                kwargs[key] = raw[key]
        if "m_values" in raw:
            kwargs["m_values"] = tuple(raw["m_values"])
        if "seeds" in raw:
            kwargs["seeds"] = tuple(raw["seeds"])
        try:
            if "lambda_grid" in raw:
                kwargs["lambda_grid"] = LambdaGrid(tuple(raw["lambda_grid"]))
            if "gamma_grid" in raw:
                kwargs["gamma_grid"] = GammaGrid(tuple(raw["gamma_grid"]))
            if "solve_options" in raw:
                if not isinstance(raw["solve_options"], dict):
                    raise ConfigError("'solve_options' must be an object")
                kwargs["solve_options"] = SolveOptions(**raw["solve_options"])
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"config {path} is invalid: {exc}") from exc
        try:
            return cls(**kwargs)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"config {path} is invalid: {exc}") from exc

    def to_dict(self) -> dict:
        doc = {
            "dataset": self.source,
            "kind": self.kind.value,
            "m_values": list(self.m_values),
            "seeds": list(self.seeds),
            "lambda_grid": list(self.lambda_grid.values),
            "gamma_grid": list(self.gamma_grid.values),
            "train_fraction": self.train_fraction,
            "val_fraction": self.val_fraction,
            "strict_gate": self.strict_gate,
            "solve_options": {
                "kkt_tolerance": self.solve_options.kkt_tolerance,
                "feasibility_tolerance": self.solve_options.feasibility_tolerance,
                "max_outer_iterations": self.solve_options.max_outer_iterations,
                "max_inner_iterations": self.solve_options.max_inner_iterations,
                "penalty_growth": self.solve_options.penalty_growth,
            },
        }
        if self.source == "csv":
            doc["csv_path"] = self.csv_path
            doc["balance"] = self.balance
        else:
            doc["n"] = self.n
            if self.source == "synthetic-sp":
                doc["phi"] = self.phi
        if self.output_dir is not None:
            doc["output_dir"] = self.output_dir
        return doc


@dataclass(frozen=True)
class BaselineRecord:
    """Status-quo fit for one seed."""

    seed: int
    lam: float
    c_star: float
    test_accuracy: float
    benefit_z0: float
    benefit_z1: float
    disparity: float


@dataclass(frozen=True)
class CellRecord:
    """One (seed, m, variant) solve; metrics are NaN unless Optimal."""

    seed: int
    m: float
    variant: str
    status: str
    c: float
    gamma: float
    compliant: bool | None
    objective: float
    test_accuracy: float
    benefit_z0: float
    benefit_z1: float
    disparity: float
    kkt_residual: float
    max_violation: float

    def counts_toward_aggregate(self) -> bool:
        if self.status != SolveStatus.OPTIMAL.value:
            return False
        if self.variant == VARIANT_LOSS_AVERSE:
            return bool(self.compliant)
        return True


@dataclass(frozen=True)
class AggregateRecord:
    """Mean/std over contributing seeds for one (m, variant)."""

    m: float
    variant: str
    n_contributing: int
    accuracy_mean: float
    accuracy_std: float
    benefit_z0_mean: float
    benefit_z0_std: float
    benefit_z1_mean: float
    benefit_z1_std: float
    disparity_mean: float
    disparity_std: float


@dataclass(frozen=True)
class SweepResult:
    config: ExperimentConfig
    baselines: tuple[BaselineRecord, ...]
    records: tuple[CellRecord, ...]
    aggregates: tuple[AggregateRecord, ...]
    models: dict[str, tuple[LinearModel, str]]

    def any_optimal(self) -> bool:
        return any(r.status == SolveStatus.OPTIMAL.value for r in self.records)


def aggregate_records(records) -> tuple[AggregateRecord, ...]:
    """Recompute per-(m, variant) aggregates from cell records."""
    keys: list[tuple[float, str]] = []
    for rec in records:
        key = (rec.m, rec.variant)
        if key not in keys:
            keys.append(key)
    keys.sort(key=lambda k: (-k[0], k[1] == VARIANT_LOSS_AVERSE))
    out = []
    for m, variant in keys:
        cells = [r for r in records if (r.m, r.variant) == (m, variant)]
        used = [r for r in cells if r.counts_toward_aggregate()]
        stats = {}
        for name in ("test_accuracy", "benefit_z0", "benefit_z1", "disparity"):
            vals = np.array([getattr(r, name) for r in used])
            stats[name] = (
                (float(vals.mean()), float(vals.std())) if len(used) else (math.nan, math.nan)
            )
        out.append(
            AggregateRecord(
                m=m,
                variant=variant,
                n_contributing=len(used),
                accuracy_mean=stats["test_accuracy"][0],
                accuracy_std=stats["test_accuracy"][1],
                benefit_z0_mean=stats["benefit_z0"][0],
                benefit_z0_std=stats["benefit_z0"][1],
                benefit_z1_mean=stats["benefit_z1"][0],
                benefit_z1_std=stats["benefit_z1"][1],
                disparity_mean=stats["disparity"][0],
                disparity_std=stats["disparity"][1],
            )
        )
    return tuple(out)


def _base_dataset(cfg: ExperimentConfig, cache: dict) -> Dataset | None:
    if cfg.source != "csv":
        return None
    if "csv" not in cache:
        cache["csv"] = load_csv(cfg.csv_path, cfg.schema)
    return cache["csv"]


def _seed_dataset(cfg: ExperimentConfig, seed: int, cache: dict) -> Dataset:
    if cfg.source == "synthetic-sp":
        return gen_sp_dataset(SynthConfig(cfg.n, seed, cfg.phi))
    if cfg.source == "synthetic-eop":
        return gen_eop_dataset(SynthConfig(cfg.n, seed))
    ds = _base_dataset(cfg, cache)
    if cfg.balance:
        ds = balance_classes(ds, seed)
    return ds


def _test_metrics(model: LinearModel, test: Dataset, kind: BenefitKind):
    b0 = benefit(model, test, kind, 0)
    b1 = benefit(model, test, kind, 1)
    return accuracy(model, test), b0, b1, abs(b0 - b1)


def run_experiment(cfg: ExperimentConfig) -> SweepResult:
    """Execute the full sweep described by ``cfg``, deterministically."""
    cache: dict = {}
    baselines: list[BaselineRecord] = []
    records: list[CellRecord] = []
    models: dict[str, tuple[LinearModel, str]] = {}
    tag = cfg.source if cfg.source != "csv" else Path(cfg.csv_path).stem

    for seed in cfg.seeds:
        ds = _seed_dataset(cfg, seed, cache)
        train, val, test = split(ds, SplitSpec(cfg.train_fraction, cfg.val_fraction, seed))
        lam = select_lambda(train, val, cfg.lambda_grid, cfg.solve_options)
        sqo = train_status_quo(train, lam, cfg.solve_options)
        c_star = compute_cstar(sqo, train, cfg.kind)
        acc, b0, b1, disp = _test_metrics(sqo.model, test, cfg.kind)
        baselines.append(BaselineRecord(seed, lam, c_star, acc, b0, b1, disp))
        models[f"seed{seed}-sqo"] = (sqo.model, tag)

        warm_nd = sqo.model.theta
        warm_la = sqo.model.theta
        for m in cfg.m_values:
            c = m * c_star
            nd = train_nondiscriminatory(train, lam, cfg.kind, c, cfg.solve_options, x0=warm_nd)
            if nd.status is SolveStatus.OPTIMAL:
                warm_nd = nd.theta.theta
                acc, b0, b1, disp = _test_metrics(nd.theta, test, cfg.kind)
                models[f"seed{seed}-m{m:g}-{VARIANT_NONDISC}"] = (nd.theta, tag)
            else:
                acc = b0 = b1 = disp = math.nan
            records.append(
                CellRecord(
                    seed=seed, m=m, variant=VARIANT_NONDISC,
                    status=nd.status.value, c=c, gamma=math.nan, compliant=None,
                    objective=nd.objective if nd.status is SolveStatus.OPTIMAL else math.nan,
                    test_accuracy=acc, benefit_z0=b0, benefit_z1=b1, disparity=disp,
                    kkt_residual=nd.kkt_residual,
                    max_violation=nd.max_constraint_violation,
                )
            )

            try:
                la = train_loss_averse(
                    train, val, lam, cfg.kind, c, cfg.gamma_grid, sqo,
                    cfg.solve_options, x0=warm_la, strict=cfg.strict_gate,
                )
            except AllGammaFailed as exc:
                statuses = {rep.status for _, rep in exc.reports}
                status = (
                    SolveStatus.INFEASIBLE
                    if statuses == {SolveStatus.INFEASIBLE}
                    else SolveStatus.ITERATION_LIMIT
                )
                records.append(
                    CellRecord(
                        seed=seed, m=m, variant=VARIANT_LOSS_AVERSE,
                        status=status.value, c=c, gamma=math.nan, compliant=False,
                        objective=math.nan, test_accuracy=math.nan,
                        benefit_z0=math.nan, benefit_z1=math.nan, disparity=math.nan,
                        kkt_residual=math.inf, max_violation=math.nan,
                    )
                )
            else:
                warm_la = la.report.theta.theta
                acc, b0, b1, disp = _test_metrics(la.report.theta, test, cfg.kind)
                models[f"seed{seed}-m{m:g}-{VARIANT_LOSS_AVERSE}"] = (la.report.theta, tag)
                records.append(
                    CellRecord(
                        seed=seed, m=m, variant=VARIANT_LOSS_AVERSE,
                        status=la.report.status.value, c=c, gamma=la.gamma,
                        compliant=la.compliant, objective=la.report.objective,
                        test_accuracy=acc, benefit_z0=b0, benefit_z1=b1, disparity=disp,
                        kkt_residual=la.report.kkt_residual,
                        max_violation=la.report.max_constraint_violation,
                    )
                )

    return SweepResult(
        config=cfg,
        baselines=tuple(baselines),
        records=tuple(records),
        aggregates=aggregate_records(records),
        models=models,
    )


def _fmt(value) -> str:
    # Plain-float repr: numpy scalars would print as np.float64(...).
    return repr(float(value))


RECORD_COLUMNS = (
    "seed", "m", "variant", "status", "c", "gamma", "compliant",
    "objective", "test_accuracy", "benefit_z0", "benefit_z1", "disparity",
    "kkt_residual", "max_violation",
)
AGGREGATE_COLUMNS = (
    "m", "variant", "n_contributing",
    "accuracy_mean", "accuracy_std",
    "benefit_z0_mean", "benefit_z0_std",
    "benefit_z1_mean", "benefit_z1_std",
    "disparity_mean", "disparity_std",
)


def emit_results(result: SweepResult, out_dir) -> dict[str, Path]:
    """Write records.csv, aggregates.csv, summary.json, and model files."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "records": out / "records.csv",
        "aggregates": out / "aggregates.csv",
        "summary": out / "summary.json",
    }

    with open(paths["records"], "w", newline="", encoding="utf-8") as fh:
        fh.write(",".join(RECORD_COLUMNS) + "\n")
        for rec in result.records:
            compliant = "" if rec.compliant is None else ("true" if rec.compliant else "false")
            row = [
                str(rec.seed), _fmt(rec.m), rec.variant, rec.status, _fmt(rec.c),
                _fmt(rec.gamma), compliant, _fmt(rec.objective),
                _fmt(rec.test_accuracy), _fmt(rec.benefit_z0),
                _fmt(rec.benefit_z1), _fmt(rec.disparity),
                _fmt(rec.kkt_residual), _fmt(rec.max_violation),
            ]
            fh.write(",".join(row) + "\n")

    with open(paths["aggregates"], "w", newline="", encoding="utf-8") as fh:
        fh.write(",".join(AGGREGATE_COLUMNS) + "\n")
        for agg in result.aggregates:
            row = [
                _fmt(agg.m), agg.variant, str(agg.n_contributing),
                _fmt(agg.accuracy_mean), _fmt(agg.accuracy_std),
                _fmt(agg.benefit_z0_mean), _fmt(agg.benefit_z0_std),
                _fmt(agg.benefit_z1_mean), _fmt(agg.benefit_z1_std),
                _fmt(agg.disparity_mean), _fmt(agg.disparity_std),
            ]
            fh.write(",".join(row) + "\n")

    n_cells = len(result.records)
    n_optimal = sum(1 for r in result.records if r.status == SolveStatus.OPTIMAL.value)
    n_counted = sum(1 for r in result.records if r.counts_toward_aggregate())
    summary = {
        "config": result.config.to_dict(),
        "environment": {
            "python": sys.version.split()[0],
            "numpy": np.__version__,
            "kernel_backend": kernels.BACKEND,
            "lossfair": __version__,
        },
        "baselines": [
            {
                "seed": b.seed,
                "lambda": b.lam,
                "c_star": b.c_star,
                "test_accuracy": b.test_accuracy,
                "benefit_z0": b.benefit_z0,
                "benefit_z1": b.benefit_z1,
                "disparity": b.disparity,
            }
            for b in result.baselines
        ],
        "counts": {"cells": n_cells, "optimal": n_optimal, "aggregated": n_counted},
    }
    with open(paths["summary"], "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")

    model_dir = out / "models"
    model_dir.mkdir(exist_ok=True)
    for stem, (model, tag) in result.models.items():
        save_model(model, model_dir / f"{stem}.txt", tag)
    return paths


def read_records_csv(path) -> tuple[CellRecord, ...]:
    """Parse a records.csv written by :func:`emit_results`."""
    records = []
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        if tuple(header) != RECORD_COLUMNS:
            raise DataError(f"{path}: unexpected records.csv header")
        for line in fh:
            parts = line.rstrip("\n").split(",")
            fields = dict(zip(RECORD_COLUMNS, parts))
            records.append(
                CellRecord(
                    seed=int(fields["seed"]),
                    m=float(fields["m"]),
                    variant=fields["variant"],
                    status=fields["status"],
                    c=float(fields["c"]),
                    gamma=float(fields["gamma"]),
                    compliant=None if fields["compliant"] == "" else fields["compliant"] == "true",
                    objective=float(fields["objective"]),
                    test_accuracy=float(fields["test_accuracy"]),
                    benefit_z0=float(fields["benefit_z0"]),
                    benefit_z1=float(fields["benefit_z1"]),
                    disparity=float(fields["disparity"]),
                    kkt_residual=float(fields["kkt_residual"]),
                    max_violation=float(fields["max_violation"]),
                )
            )
    return tuple(records)


def save_model(model: LinearModel, path, tag: str) -> None:
    """Plain-text model file: one header line (dimension, tag), then values."""
    if any(ch.isspace() for ch in tag):
        raise ValueError("model tag must not contain whitespace")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{model.dim} {tag}\n")
        for value in model.theta:
            fh.write(repr(float(value)) + "\n")


def load_model(path) -> tuple[LinearModel, str]:
    """Read a model file written by :func:`save_model`."""
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise DataError(f"cannot read model file {path}: {exc}") from exc
    if not lines:
        raise DataError(f"model file {path} is empty")
    head = lines[0].split()
    if len(head) != 2:
        raise DataError(f"model file {path}: header must be '<dimension> <tag>'")
    try:
        dim = int(head[0])
        values = [float(v) for v in lines[1:] if v.strip()]
    except ValueError as exc:
        raise DataError(f"model file {path} is malformed: {exc}") from exc
    if len(values) != dim:
        raise DataError(f"model file {path}: header says {dim} values, found {len(values)}")
    return LinearModel(np.array(values)), head[1]
