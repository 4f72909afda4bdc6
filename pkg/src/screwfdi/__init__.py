"""Failure detection and isolation for threaded-fastener robotic assembly.

The package turns raw multivariate screwing recordings (forces, torques,
optionally feed depth and rotation angle) into a three-way prediction:
mounted, not mounted, or jammed. It contains the full pipeline: a
from-scratch reverse-mode autodiff engine, five neural architectures,
SMOTE-based imbalance handling, leakage-safe preprocessing, k-fold
hyperparameter search, task metrics, and paired statistical comparison.
"""

from .datasets import (
    Dataset,
    ScrewingSample,
    SimulatorConfig,
    as_arrays,
    ingest_csv,
    save_dataset,
    simulate,
    stratified_kfold,
    stratified_split,
)
from .errors import (
    ConfigurationError,
    DegenerateInputError,
    ExperimentFailure,
    IngestionError,
    NumericError,
    TrainingDiverged,
)
from .evaluation import (
    ConfusionMatrix,
    MetricReport,
    PairedTTestResult,
    confusion,
    metrics,
    objective,
    paired_ttest,
)
from .imbalance import (
    ClassWeights,
    SmoteConfig,
    VariantSpec,
    build_variant,
    class_weights,
    smote_oversample,
)
from .models import (
    HyperParams,
    ModelInstance,
    build_model,
    count_parameters,
    sample_hyperparams,
)
from .pipeline import (
    ExperimentConfig,
    ExperimentResult,
    TrialRecord,
    compare,
    optimize,
    prepare_experiment,
    run_trial,
)
from .preprocess import (
    PreprocessConfig,
    PreprocessorState,
    apply_preprocessor,
    clean_outliers,
    fit_preprocessor,
    paa,
)
from .training import TrainingConfig, evaluate_model, train_model

__version__ = "0.1.0"

__all__ = [
    "ClassWeights",
    "ConfigurationError",
    "ConfusionMatrix",
    "Dataset",
    "DegenerateInputError",
    "ExperimentConfig",
    "ExperimentFailure",
    "ExperimentResult",
    "HyperParams",
    "IngestionError",
    "MetricReport",
    "ModelInstance",
    "NumericError",
    "PairedTTestResult",
    "PreprocessConfig",
    "PreprocessorState",
    "ScrewingSample",
    "SimulatorConfig",
    "SmoteConfig",
    "TrainingConfig",
    "TrainingDiverged",
    "TrialRecord",
    "VariantSpec",
    "apply_preprocessor",
    "as_arrays",
    "build_model",
    "build_variant",
    "class_weights",
    "clean_outliers",
    "compare",
    "confusion",
    "count_parameters",
    "evaluate_model",
    "fit_preprocessor",
    "ingest_csv",
    "metrics",
    "objective",
    "optimize",
    "paa",
    "paired_ttest",
    "prepare_experiment",
    "run_trial",
    "sample_hyperparams",
    "save_dataset",
    "simulate",
    "smote_oversample",
    "stratified_kfold",
    "stratified_split",
    "train_model",
]
