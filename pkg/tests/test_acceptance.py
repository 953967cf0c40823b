"""Acceptance gate: every stated criterion at its stated tolerance.

Run `pytest tests/test_acceptance.py -v -s` to see one PASS/FAIL line
per criterion.  The synthetic criteria run from nothing.  Criteria 5
and 6 need the public CSVs supplied through LOSSFAIR_ADULT_CSV and
LOSSFAIR_SQF_CSV (plus LOSSFAIR_SQF_SCHEMA) and are skipped otherwise.
"""

import math
import os
import time
from pathlib import Path

import numpy as np
import pytest

from conftest import make_dataset
from lossfair.constraints import ConstraintSet, covariance_cap, loss_averse
from lossfair.data import CsvSchema, SplitSpec, load_csv, split
from lossfair.harness import (
    VARIANT_LOSS_AVERSE,
    VARIANT_NONDISC,
    ExperimentConfig,
    emit_results,
    run_experiment,
)
from lossfair.metrics import (
    BenefitKind,
    LinearModel,
    accuracy,
    benefit,
    covariance_proxy,
    group_mean_distance,
)
from lossfair.solver import SolveStatus, gradient, minimize, objective
from lossfair.synthgen import SynthConfig, gen_eop_dataset, gen_sp_dataset
from lossfair.trainer import LambdaGrid, select_lambda, train_status_quo

AR = BenefitKind.ACCEPTANCE_RATE
TPR = BenefitKind.TRUE_POSITIVE_RATE
OPTIMAL = SolveStatus.OPTIMAL.value
REPO = Path(__file__).resolve().parent.parent


class Gate:
    """Collects tolerance checks and prints one PASS/FAIL line."""

    def __init__(self, label):
        self.label = label
        self.failures = []
        self.notes = []

    def within(self, name, actual, target, tol):
        self.notes.append(f"{name}={actual:.4f}")
        if not abs(actual - target) <= tol:
            self.failures.append(f"{name}={actual:.4f} off {target}±{tol}")

    def holds(self, name, condition):
        if condition:
            self.notes.append(name)
        else:
            self.failures.append(name)

    def finish(self):
        status = "PASS" if not self.failures else "FAIL"
        detail = "; ".join(self.failures if self.failures else self.notes)
        print(f"{self.label}: {status} [{detail}]")
        assert not self.failures, f"{self.label}: {detail}"


def agg_at(result, m, variant):
    return next(a for a in result.aggregates if a.m == m and a.variant == variant)


def rebuild_train(config, seed):
    if config.source == "synthetic-sp":
        ds = gen_sp_dataset(SynthConfig(config.n, seed, config.phi))
    else:
        ds = gen_eop_dataset(SynthConfig(config.n, seed))
    train, _, _ = split(
        ds, SplitSpec(config.train_fraction, config.val_fraction, seed)
    )
    return train


@pytest.fixture(scope="module")
def sp_sweep():
    cfg = ExperimentConfig(source="synthetic-sp", kind=AR)
    start = time.perf_counter()
    result = run_experiment(cfg)
    return result, time.perf_counter() - start


@pytest.fixture(scope="module")
def eop_sweep():
    cfg = ExperimentConfig(source="synthetic-eop", kind=TPR)
    start = time.perf_counter()
    result = run_experiment(cfg)
    return result, time.perf_counter() - start


def test_criterion_1_sp_baseline():
    # unconstrained classifier on the SP generator, 5 seeds, timed
    start = time.perf_counter()
    accs, ar0, ar1 = [], [], []
    for seed in (0, 1, 2, 3, 4):
        ds = gen_sp_dataset(SynthConfig(6000, seed))
        train, val, test = split(ds, SplitSpec(seed=seed))
        lam = select_lambda(train, val, LambdaGrid())
        sqo = train_status_quo(train, lam)
        accs.append(accuracy(sqo.model, test))
        ar0.append(benefit(sqo.model, test, AR, 0))
        ar1.append(benefit(sqo.model, test, AR, 1))
    elapsed = time.perf_counter() - start
    gate = Gate("criterion 1 (SP baseline)")
    gate.within("accuracy", float(np.mean(accs)), 0.88, 0.03)
    gate.within("AR z0", float(np.mean(ar0)), 0.31, 0.04)
    gate.within("AR z1", float(np.mean(ar1)), 0.72, 0.04)
    gate.holds(f"runtime {elapsed:.1f}s <= 30s", elapsed <= 30.0)
    gate.finish()


def test_criterion_2_sp_nondisc_at_zero(sp_sweep):
    result, _ = sp_sweep
    agg = agg_at(result, 0.0, VARIANT_NONDISC)
    gate = Gate("criterion 2 (SP nondisc c=0)")
    gate.within("AR z0", agg.benefit_z0_mean, 0.51, 0.05)
    gate.within("AR z1", agg.benefit_z1_mean, 0.52, 0.05)
    gate.within("accuracy", agg.accuracy_mean, 0.72, 0.04)
    gate.holds(f"seeds contributing {agg.n_contributing}/5", agg.n_contributing == 5)
    gate.finish()


def test_criterion_3_sp_loss_averse_at_zero(sp_sweep):
    result, _ = sp_sweep
    agg = agg_at(result, 0.0, VARIANT_LOSS_AVERSE)
    base0 = float(np.mean([b.benefit_z0 for b in result.baselines]))
    base1 = float(np.mean([b.benefit_z1 for b in result.baselines]))
    gate = Gate("criterion 3 (SP loss-averse c=0)")
    gate.within("AR z0", agg.benefit_z0_mean, 0.80, 0.05)
    gate.within("AR z1", agg.benefit_z1_mean, 0.86, 0.05)
    gate.within("accuracy", agg.accuracy_mean, 0.65, 0.05)
    gate.holds(
        f"ARs ({agg.benefit_z0_mean:.3f}, {agg.benefit_z1_mean:.3f}) "
        f"strictly above baseline ({base0:.3f}, {base1:.3f})",
        agg.benefit_z0_mean > base0 and agg.benefit_z1_mean > base1,
    )
    gate.finish()


def test_criterion_4_eop_suite(eop_sweep):
    result, elapsed = eop_sweep
    gate = Gate("criterion 4 (EOP suite)")
    base_acc = float(np.mean([b.test_accuracy for b in result.baselines]))
    base_tpr1 = float(np.mean([b.benefit_z1 for b in result.baselines]))
    base_tpr0 = float(np.mean([b.benefit_z0 for b in result.baselines]))
    gate.within("baseline accuracy", base_acc, 0.86, 0.03)
    gate.within("baseline TPR z1", base_tpr1, 0.94, 0.04)
    gate.within("baseline TPR z0", base_tpr0, 0.77, 0.04)
    nd = agg_at(result, 0.0, VARIANT_NONDISC)
    gate.within("nondisc TPR z1", nd.benefit_z1_mean, 0.72, 0.05)
    gate.within("nondisc TPR z0", nd.benefit_z0_mean, 0.79, 0.05)
    gate.within("nondisc accuracy", nd.accuracy_mean, 0.74, 0.04)
    la = agg_at(result, 0.0, VARIANT_LOSS_AVERSE)
    gate.within("loss-averse TPR z1", la.benefit_z1_mean, 0.95, 0.04)
    gate.within("loss-averse TPR z0", la.benefit_z0_mean, 0.99, 0.04)
    gate.within("loss-averse accuracy", la.accuracy_mean, 0.64, 0.05)
    excluded = len(result.config.seeds) - la.n_contributing
    non_optimal = sum(
        1 for r in result.records
        if r.m == 0.0 and r.variant == VARIANT_LOSS_AVERSE and r.status != OPTIMAL
    )
    gate.holds(
        f"excluded seeds at m=0: {excluded} ({non_optimal} non-Optimal, "
        f"{excluded - non_optimal} gate-failing)",
        la.n_contributing >= 1,
    )
    gate.holds(f"sweep runtime {elapsed:.0f}s <= 600s", elapsed <= 600.0)
    gate.finish()


ADULT_CSV = os.environ.get("LOSSFAIR_ADULT_CSV", "")
SQF_CSV = os.environ.get("LOSSFAIR_SQF_CSV", "")
SQF_SCHEMA = os.environ.get("LOSSFAIR_SQF_SCHEMA", "")


@pytest.mark.skipif(not ADULT_CSV, reason="set LOSSFAIR_ADULT_CSV to run")
def test_criterion_5_adult():
    schema_path = os.environ.get(
        "LOSSFAIR_ADULT_SCHEMA", str(REPO / "data" / "adult.schema.json")
    )
    cfg = ExperimentConfig(
        source="csv", kind=AR, csv_path=ADULT_CSV,
        schema=CsvSchema.from_file(schema_path),
        m_values=(1.0, 0.5, 0.0),
    )
    result = run_experiment(cfg)
    gate = Gate("criterion 5 (Adult)")
    gate.within(
        "baseline accuracy",
        float(np.mean([b.test_accuracy for b in result.baselines])), 0.846, 0.01,
    )
    gate.within(
        "baseline AR z0",
        float(np.mean([b.benefit_z0 for b in result.baselines])), 0.08, 0.02,
    )
    gate.within(
        "baseline AR z1",
        float(np.mean([b.benefit_z1 for b in result.baselines])), 0.26, 0.02,
    )
    nd = agg_at(result, 0.0, VARIANT_NONDISC)
    gate.within("nondisc AR z0", nd.benefit_z0_mean, 0.13, 0.03)
    gate.within("nondisc AR z1", nd.benefit_z1_mean, 0.20, 0.03)
    gate.within("nondisc accuracy", nd.accuracy_mean, 0.837, 0.01)
    la = agg_at(result, 0.0, VARIANT_LOSS_AVERSE)
    gate.within("loss-averse AR z0", la.benefit_z0_mean, 0.24, 0.03)
    gate.within("loss-averse AR z1", la.benefit_z1_mean, 0.27, 0.03)
    gate.within("loss-averse accuracy", la.accuracy_mean, 0.808, 0.015)
    gate.finish()


@pytest.mark.skipif(
    not (SQF_CSV and SQF_SCHEMA),
    reason="set LOSSFAIR_SQF_CSV and LOSSFAIR_SQF_SCHEMA to run",
)
def test_criterion_6_sqf():
    # schema must put the African-American level at z=0 so reported
    # tuples read (White, African-American) = (z1, z0)
    cfg = ExperimentConfig(
        source="csv", kind=TPR, csv_path=SQF_CSV,
        schema=CsvSchema.from_file(SQF_SCHEMA), balance=True,
        m_values=(1.0, 0.5, 0.0),
    )
    result = run_experiment(cfg)
    gate = Gate("criterion 6 (SQF)")
    gate.within(
        "baseline accuracy",
        float(np.mean([b.test_accuracy for b in result.baselines])), 0.744, 0.015,
    )
    gate.within(
        "baseline TPR z1",
        float(np.mean([b.benefit_z1 for b in result.baselines])), 0.69, 0.03,
    )
    gate.within(
        "baseline TPR z0",
        float(np.mean([b.benefit_z0 for b in result.baselines])), 0.82, 0.03,
    )
    nd = agg_at(result, 0.0, VARIANT_NONDISC)
    gate.within("nondisc TPR z1", nd.benefit_z1_mean, 0.72, 0.03)
    gate.within("nondisc TPR z0", nd.benefit_z0_mean, 0.76, 0.03)
    gate.within("nondisc accuracy", nd.accuracy_mean, 0.714, 0.015)
    la = agg_at(result, 0.0, VARIANT_LOSS_AVERSE)
    gate.within("loss-averse TPR z1", la.benefit_z1_mean, 0.81, 0.03)
    gate.within("loss-averse TPR z0", la.benefit_z0_mean, 0.84, 0.03)
    gate.within("loss-averse accuracy", la.accuracy_mean, 0.71, 0.02)
    gate.finish()


def random_instance(rng, n_lo=30, n_hi=200, dim_lo=2, dim_hi=8):
    n = int(rng.integers(n_lo, n_hi + 1))
    d = int(rng.integers(dim_lo, dim_hi + 1))
    features = rng.normal(size=(n, d))
    labels = rng.choice([-1, 1], size=n)
    sensitive = rng.integers(0, 2, size=n)
    labels[0], labels[1] = 1, -1
    sensitive[0], sensitive[1] = 0, 1
    return make_dataset(features, labels, sensitive)


def test_criterion_7a_gradient_matches_finite_differences():
    rng = np.random.default_rng(77)
    worst = 0.0
    for _ in range(50):
        ds = random_instance(rng)
        theta = rng.normal(scale=1.5, size=ds.dim)
        lam = float(10.0 ** rng.uniform(-6, -1))
        g = gradient(ds, theta, lam)
        fd = np.empty_like(g)
        for j in range(ds.dim):
            h = 6e-6 * (1.0 + abs(theta[j]))
            up, down = theta.copy(), theta.copy()
            up[j] += h
            down[j] -= h
            fd[j] = (objective(ds, up, lam) - objective(ds, down, lam)) / (2 * h)
        err = np.max(np.abs(g - fd)) / max(1.0, np.max(np.abs(g)))
        worst = max(worst, err)
    gate = Gate("criterion 7a (gradient vs finite differences)")
    gate.holds(f"50 instances, worst rel err {worst:.2e} <= 1e-5", worst <= 1e-5)
    gate.finish()


def test_criterion_7b_kkt_on_every_optimal_solve(sp_sweep, eop_sweep):
    gate = Gate("criterion 7b (KKT and feasibility on every Optimal solve)")
    checked = 0
    worst_kkt, worst_feas = 0.0, 0.0
    for result, _ in (sp_sweep, eop_sweep):
        for rec in result.records:
            if rec.status == OPTIMAL:
                checked += 1
                worst_kkt = max(worst_kkt, rec.kkt_residual)
                worst_feas = max(worst_feas, rec.max_violation)
    gate.holds(
        f"{checked} Optimal solves, max KKT {worst_kkt:.2e} <= 1e-6",
        checked > 0 and worst_kkt <= 1e-6,
    )
    gate.holds(f"max violation {worst_feas:.2e} <= 1e-6", worst_feas <= 1e-6)

    # independent re-solve battery on m=0 cells, residuals recomputed
    # from scratch out of the returned certificate
    for result, _ in (sp_sweep, eop_sweep):
        cfg = result.config
        for rec in result.records:
            if rec.m != 0.0 or rec.seed != cfg.seeds[0] or rec.status != OPTIMAL:
                continue
            train = rebuild_train(cfg, rec.seed)
            lam = next(b.lam for b in result.baselines if b.seed == rec.seed)
            cons = covariance_cap(train, cfg.kind, rec.c)
            if rec.variant == VARIANT_LOSS_AVERSE:
                sqo_model, _ = result.models[f"seed{rec.seed}-sqo"]
                cons = cons + loss_averse(train, cfg.kind, sqo_model, rec.gamma)
            report = minimize(train, lam, cons)
            A, b = cons.matrix()
            grad_f = gradient(train, report.theta.theta, lam)
            stationarity = np.max(np.abs(grad_f + A.T @ report.multipliers))
            residuals = A @ report.theta.theta - b
            complementarity = np.max(np.abs(report.multipliers * residuals))
            gate.holds(
                f"recomputed certificate seed{rec.seed} {rec.variant}",
                report.status is SolveStatus.OPTIMAL
                and np.all(report.multipliers >= 0)
                and stationarity <= 1e-6
                and complementarity <= 1e-6
                and np.max(residuals) <= 1e-6,
            )
    gate.finish()


def test_criterion_7c_proxy_and_rows_affine(tiny_sp):
    rng = np.random.default_rng(5)
    gate = Gate("criterion 7c (proxy linear, constraint rows affine)")
    eop_ds = gen_eop_dataset(SynthConfig(500, seed=2))
    ok_linear, ok_affine = True, True
    for _ in range(25):
        a = rng.normal(size=3)
        b = rng.normal(size=3)
        alpha, beta = rng.normal(size=2)
        for ds, kind in ((tiny_sp, AR), (eop_ds, TPR)):
            lhs = covariance_proxy(LinearModel(alpha * a + beta * b), ds, kind)
            rhs = alpha * covariance_proxy(LinearModel(a), ds, kind) + (
                beta * covariance_proxy(LinearModel(b), ds, kind)
            )
            if abs(lhs - rhs) > 1e-9 * (1 + abs(rhs)):
                ok_linear = False
            sqo = LinearModel(rng.normal(size=3))
            rows = covariance_cap(ds, kind, 0.2) + loss_averse(ds, kind, sqo, 0.1)
            t = float(rng.uniform(0, 1))
            mix = t * a + (1 - t) * b
            for row in rows:
                lhs_v = row.violation(mix)
                rhs_v = t * row.violation(a) + (1 - t) * row.violation(b)
                if abs(lhs_v - rhs_v) > 1e-9 * (1 + abs(rhs_v)):
                    ok_affine = False
    gate.holds("covariance_proxy linear in theta (25 draws, SP and EOP)", ok_linear)
    gate.holds("all constraint rows affine in theta", ok_affine)
    gate.finish()


def grid_minimum(ds, lam, cons, center, span=1.0, points=200):
    # brute-force min of the objective over a points^3 box, feasible only
    X, y = ds.features, ds.labels.astype(np.float64)
    axes = [np.linspace(center[j] - span, center[j] + span, points) for j in range(3)]
    g1, g2 = np.meshgrid(axes[1], axes[2], indexing="ij")
    sheet = np.column_stack([g1.ravel(), g2.ravel()])
    A, b = cons.matrix()
    best = np.inf
    n_feasible = 0
    for t0 in axes[0]:
        thetas = np.column_stack([np.full(len(sheet), t0), sheet])
        feasible = np.all(thetas @ A.T <= b, axis=1)
        n_feasible += int(feasible.sum())
        if not feasible.any():
            continue
        cand = thetas[feasible]
        margins = (cand @ X.T) * y
        losses = np.mean(np.log1p(np.exp(-np.abs(margins))) + np.maximum(-margins, 0.0), axis=1)
        losses += lam * np.sum(cand[:, :-1] ** 2, axis=1)
        best = min(best, float(losses.min()))
    return best, n_feasible


def test_criterion_7d_grid_oracle():
    rng = np.random.default_rng(404)
    gate = Gate("criterion 7d (200^3 grid brute-force oracle)")
    lam = 1e-3
    for trial in range(10):
        n = 48
        features = rng.normal(size=(n, 2)) + rng.choice([-1.0, 1.0], size=(n, 1))
        labels = np.where(features[:, 0] + 0.5 * rng.normal(size=n) > 0, 1, -1)
        sensitive = (features[:, 1] + 0.3 * rng.normal(size=n) > 0).astype(int)
        labels[:2], sensitive[:2] = [1, -1], [0, 1]
        ds = make_dataset(features, labels, sensitive)
        kind = AR if trial % 2 == 0 else TPR
        free = minimize(ds, lam, ConstraintSet(()))
        cap = 0.4 * abs(covariance_proxy(free.theta, ds, kind)) + 0.05
        cons = covariance_cap(ds, kind, cap)
        if trial >= 5:
            cons = cons + loss_averse(ds, kind, free.theta, 0.02)
        report = minimize(ds, lam, cons, x0=free.theta.theta)
        assert report.status is SolveStatus.OPTIMAL
        best, n_feasible = grid_minimum(ds, lam, cons, report.theta.theta)
        gate.holds(
            f"trial {trial}: solver {report.objective:.6f} <= grid {best:.6f} + 1e-3 "
            f"({n_feasible} feasible points)",
            n_feasible >= 1000 and report.objective <= best + 1e-3,
        )
        # sanity: the box actually brackets the optimum
        gate.holds(f"trial {trial}: grid within 0.05", best - report.objective <= 0.05)
    gate.finish()


def test_criterion_7e_loss_averse_compliance(sp_sweep, eop_sweep):
    gate = Gate("criterion 7e (loss-averse floors on every Optimal solve)")
    checked = 0
    worst = np.inf
    for result, _ in (sp_sweep, eop_sweep):
        cfg = result.config
        trains = {seed: rebuild_train(cfg, seed) for seed in cfg.seeds}
        for rec in result.records:
            if rec.variant != VARIANT_LOSS_AVERSE or rec.status != OPTIMAL:
                continue
            train = trains[rec.seed]
            model, _ = result.models[f"seed{rec.seed}-m{rec.m:g}-{rec.variant}"]
            sqo_model, _ = result.models[f"seed{rec.seed}-sqo"]
            for group in (0, 1):
                gain = group_mean_distance(model, train, cfg.kind, group) - (
                    group_mean_distance(sqo_model, train, cfg.kind, group)
                )
                worst = min(worst, gain - rec.gamma)
            checked += 1
    gate.holds(
        f"{checked} Optimal loss-averse solves, min slack {worst:.2e} >= -1e-6",
        checked > 0 and worst >= -1e-6,
    )
    gate.finish()


def test_criterion_7f_monotone_tightening(sp_sweep, eop_sweep):
    gate = Gate("criterion 7f (objective ordering across the m-sweep)")
    ok = True
    for result, _ in (sp_sweep, eop_sweep):
        for seed in result.config.seeds:
            chain = [
                r for r in result.records
                if r.seed == seed and r.variant == VARIANT_NONDISC and r.status == OPTIMAL
            ]
            chain.sort(key=lambda r: -r.m)
            for prev, cur in zip(chain, chain[1:]):
                if cur.objective < prev.objective - 1e-7:
                    ok = False
    gate.holds("shrinking the cap never lowers the optimum (both sweeps)", ok)
    gate.finish()


def test_criterion_7g_bit_identical_reruns(tmp_path):
    gate = Gate("criterion 7g (bit-identical reruns)")
    cfg = ExperimentConfig(
        source="synthetic-sp", kind=AR, n=700, m_values=(1.0, 0.0), seeds=(0, 1),
    )
    paths = []
    for sub in ("a", "b"):
        result = run_experiment(cfg)
        paths.append(emit_results(result, tmp_path / sub))
    for key in ("records", "aggregates", "summary"):
        gate.holds(
            f"{key}.csv identical" if key != "summary" else "summary.json identical",
            paths[0][key].read_bytes() == paths[1][key].read_bytes(),
        )
    gate.finish()
