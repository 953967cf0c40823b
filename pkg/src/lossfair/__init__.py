"""Fairness-constrained logistic classifiers with loss-averse updates."""

__version__ = "0.1.0"

from .constraints import (
    AffineConstraint,
    ConstraintSet,
    covariance_cap,
    eop_constraint,
    loss_averse,
    loss_averse_ar,
    loss_averse_tpr,
    sp_constraint,
)
from .data import (
    CsvSchema,
    Dataset,
    DataError,
    SplitSpec,
    balance_classes,
    export_csv,
    load_csv,
    split,
)
from .harness import (
    ConfigError,
    ExperimentConfig,
    SweepResult,
    aggregate_records,
    emit_results,
    load_model,
    run_experiment,
    save_model,
)
from .metrics import (
    BenefitKind,
    LinearModel,
    accuracy,
    benefit,
    covariance_proxy,
    disparity,
    group_mean_distance,
    predict,
    signed_distance,
    signed_distances,
)
from .solver import SolveOptions, SolveReport, SolveStatus, gradient, minimize, objective
from .synthgen import GaussianSpec, SynthConfig, gen_eop_dataset, gen_sp_dataset, sample_mvn
from .trainer import (
    AllGammaFailed,
    GammaGrid,
    LambdaGrid,
    LossAverseResult,
    SolveFailure,
    StatusQuo,
    compute_cstar,
    select_lambda,
    train_loss_averse,
    train_nondiscriminatory,
    train_status_quo,
)

__all__ = [
    "AffineConstraint",
    "AllGammaFailed",
    "BenefitKind",
    "ConfigError",
    "ConstraintSet",
    "CsvSchema",
    "DataError",
    "Dataset",
    "ExperimentConfig",
    "GammaGrid",
    "GaussianSpec",
    "LambdaGrid",
    "LinearModel",
    "LossAverseResult",
    "SolveFailure",
    "SolveOptions",
    "SolveReport",
    "SolveStatus",
    "SplitSpec",
    "StatusQuo",
    "SweepResult",
    "SynthConfig",
    "accuracy",
    "aggregate_records",
    "balance_classes",
    "benefit",
    "compute_cstar",
    "covariance_cap",
    "covariance_proxy",
    "disparity",
    "emit_results",
    "eop_constraint",
    "export_csv",
    "gen_eop_dataset",
    "gen_sp_dataset",
    "gradient",
    "group_mean_distance",
    "load_csv",
    "load_model",
    "loss_averse",
    "loss_averse_ar",
    "loss_averse_tpr",
    "minimize",
    "objective",
    "predict",
    "run_experiment",
    "sample_mvn",
    "save_model",
    "select_lambda",
    "signed_distance",
    "signed_distances",
    "sp_constraint",
    "split",
    "train_loss_averse",
    "train_nondiscriminatory",
    "train_status_quo",
]
