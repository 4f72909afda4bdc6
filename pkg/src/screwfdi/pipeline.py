"""Experiment orchestration.

The flow per experiment: load data, stratified 80/20 split, fit the
preprocessing chain on the training split only, build k folds, then run a
random hyperparameter search where every trial trains one model per fold
from a fresh initialization. The best trial (highest mean mounted
precision, ties broken by fewer parameters, then lower index) is retrained
on the full training split and evaluated once on the untouched test split.

Leakage rules enforced here:
- the preprocessor (outlier cleaning, truncation length, normalization
  statistics) is fitted on the training split only;
- SMOTE variants are rebuilt inside each fold from that fold's training
  portion only, so no validation or test sample ever serves as a base or
  neighbor;
- the test split is used exactly once, after the search has finished.

All randomness derives from the experiment's master seed, so reruns with
the same configuration produce identical metric values.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field

import numpy as np

from .datasets import (
    Dataset,
    SimulatorConfig,
    as_arrays,
    ingest_csv,
    simulate,
    stratified_kfold,
    stratified_split,
)
from .errors import (
    ConfigurationError,
    ExperimentFailure,
    NumericError,
    TrainingDiverged,
)
from .evaluation import MetricReport, objective, paired_ttest
from .imbalance import VariantSpec, build_variant, class_weights
from .models import KINDS, HyperParams, build_model, count_parameters, sample_hyperparams
from .preprocess import PreprocessConfig, apply_preprocessor, fit_preprocessor
from .seeding import (
    TAG_AUGMENT,
    TAG_FINAL,
    TAG_INIT,
    TAG_SAMPLING,
    TAG_SHUFFLE,
    derive_rng,
)
from .training import TrainingConfig, evaluate_model, train_model

MODES = ("none", "class_weights", "smote")
METRIC_SELECTORS = ("mounted_precision", "jammed_recall")
RECORD_SCHEMA_VERSION = 1

_SEED_BOUND = 2**63


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything one experiment needs; exactly one data source is set."""

    model_kind: str
    data_path: str | None = None
    simulator: SimulatorConfig | None = None
    preprocess: PreprocessConfig = field(default_factory=PreprocessConfig)
    variant: VariantSpec = field(default_factory=lambda: VariantSpec("original"))
    imbalance_mode: str = "none"
    smote_k: int = 5
    trials: int = 100
    folds: int = 10
    training: TrainingConfig = field(default_factory=TrainingConfig)
    test_fraction: float = 0.2
    master_seed: int = 0
    name: str | None = None

    def validate(self) -> "ExperimentConfig":
        if self.model_kind not in KINDS:
            raise ConfigurationError(
                f"model_kind must be one of {KINDS}, got {self.model_kind!r}"
            )
        if (self.data_path is None) == (self.simulator is None):
            raise ConfigurationError(
                "exactly one of data_path and simulator must be set"
            )
        if self.simulator is not None:
            self.simulator.validate()
        self.preprocess.validate()
        self.variant.validate()
        self.training.validate()
        if self.imbalance_mode not in MODES:
            raise ConfigurationError(
                f"imbalance_mode must be one of {MODES}, "
                f"got {self.imbalance_mode!r}"
            )
        if self.imbalance_mode == "smote" and self.variant.variant == "original":
            raise ConfigurationError(
                "imbalance_mode 'smote' needs variant 'balanced' or 'synthetic'"
            )
        if self.imbalance_mode != "smote" and self.variant.variant != "original":
            raise ConfigurationError(
                f"variant {self.variant.variant!r} requires "
                "imbalance_mode 'smote'"
            )
        if self.smote_k < 1:
            raise ConfigurationError(f"smote_k must be >= 1, got {self.smote_k}")
        if self.trials < 1:
            raise ConfigurationError(f"trials must be >= 1, got {self.trials}")
        if self.folds < 2:
            raise ConfigurationError(f"folds must be >= 2, got {self.folds}")
        if not 0.0 < self.test_fraction < 1.0:
            raise ConfigurationError(
                f"test_fraction must lie in (0, 1), got {self.test_fraction}"
            )
        if self.master_seed < 0:
            raise ConfigurationError(
                f"master_seed must be non-negative, got {self.master_seed}"
            )
        return self

    def resolved_name(self) -> str:
        if self.name:
            return self.name
        parts = [self.model_kind.lower(), self.variant.variant]
        if self.imbalance_mode == "class_weights":
            parts.append("cw")
        parts.append("rz" if self.preprocess.include_rotation else "ft")
        return "-".join(parts)


@dataclass(frozen=True)
class FoldData:
    """One fold's ready-to-train arrays; augmentation already applied."""

    fold_index: int
    train_x: np.ndarray
    train_y: np.ndarray
    val_x: np.ndarray
    val_y: np.ndarray
    weights: np.ndarray | None
    train_ids: tuple
    val_ids: tuple
    lineage: tuple = ()


@dataclass(frozen=True)
class TrialRecord:
    """Outcome of one hyperparameter trial across all folds."""

    trial_index: int
    seed: int
    hyperparams: HyperParams
    fold_reports: tuple
    objective: float
    parameter_count: int | None
    duration_seconds: float
    failed: bool = False
    failure_reason: str | None = None

    def to_dict(self) -> dict:
        return {
            "schema_version": RECORD_SCHEMA_VERSION,
            "trial_index": self.trial_index,
            "seed": self.seed,
            "hyperparams": self.hyperparams.to_dict(),
            "fold_reports": [r.to_dict() for r in self.fold_reports],
            "objective": self.objective,
            "parameter_count": self.parameter_count,
            "duration_seconds": self.duration_seconds,
            "failed": self.failed,
            "failure_reason": self.failure_reason,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "TrialRecord":
        version = payload.get("schema_version")
        if version != RECORD_SCHEMA_VERSION:
            raise ConfigurationError(
                f"unsupported record schema_version {version!r}"
            )
        return cls(
            trial_index=payload["trial_index"],
            seed=payload["seed"],
            hyperparams=HyperParams.from_dict(payload["hyperparams"]),
            fold_reports=tuple(
                MetricReport.from_dict(r) for r in payload["fold_reports"]
            ),
            objective=payload["objective"],
            parameter_count=payload["parameter_count"],
            duration_seconds=payload["duration_seconds"],
            failed=payload["failed"],
            failure_reason=payload["failure_reason"],
        )


@dataclass(frozen=True)
class PreparedExperiment:
    """Everything downstream of data loading, before any training."""

    config: ExperimentConfig
    train: Dataset
    test: Dataset
    preprocessor_state: object
    folds: tuple
    fold_data: tuple
    input_shape: tuple


@dataclass(frozen=True)
class ExperimentResult:
    """Search records plus the final model's held-out evaluation."""

    config: ExperimentConfig
    records: tuple
    best: TrialRecord
    final_model: object
    test_report: MetricReport
    fold_validation_ids: tuple
    train_sample_ids: tuple
    test_sample_ids: tuple

    @property
    def name(self) -> str:
        return self.config.resolved_name()

    def summary_dict(self) -> dict:
        return {
            "schema_version": RECORD_SCHEMA_VERSION,
            "name": self.name,
            "model_kind": self.config.model_kind,
            "variant": self.config.variant.variant,
            "imbalance_mode": self.config.imbalance_mode,
            "include_rotation": self.config.preprocess.include_rotation,
            "master_seed": self.config.master_seed,
            "trials": self.config.trials,
            "folds": self.config.folds,
            "best_trial_index": self.best.trial_index,
            "best_objective": self.best.objective,
            "best_hyperparams": self.best.hyperparams.to_dict(),
            "best_parameter_count": self.best.parameter_count,
            "best_fold_reports": [r.to_dict() for r in self.best.fold_reports],
            "test_report": self.test_report.to_dict(),
            "fold_validation_ids": [list(ids) for ids in self.fold_validation_ids],
            "train_sample_ids": list(self.train_sample_ids),
            "test_sample_ids": list(self.test_sample_ids),
        }


@dataclass(frozen=True)
class ResultView:
    """The slice of a result that pairwise comparison needs.

    Built either from a live ExperimentResult or from persisted summary
    files, so `compare` works identically across both.
    """

    name: str
    fold_validation_ids: tuple
    fold_reports: tuple

    @classmethod
    def from_result(cls, result: ExperimentResult) -> "ResultView":
        return cls(
            name=result.name,
            fold_validation_ids=result.fold_validation_ids,
            fold_reports=result.best.fold_reports,
        )

    @classmethod
    def from_summary(cls, summary: dict) -> "ResultView":
        return cls(
            name=summary["name"],
            fold_validation_ids=tuple(
                tuple(ids) for ids in summary["fold_validation_ids"]
            ),
            fold_reports=tuple(
                MetricReport.from_dict(r) for r in summary["best_fold_reports"]
            ),
        )


@dataclass(frozen=True)
class PairwiseComparison:
    """Paired t-tests between every pair of experiments on one metric."""

    metric: str
    names: tuple
    entries: dict  # (i, j) with i < j -> PairedTTestResult

    def to_dict(self) -> dict:
        return {
            "metric": self.metric,
            "names": list(self.names),
            "entries": [
                {
                    "first": self.names[i],
                    "second": self.names[j],
                    **result.to_dict(),
                }
                for (i, j), result in sorted(self.entries.items())
            ],
        }


def _load_dataset(cfg: ExperimentConfig) -> Dataset:
    if cfg.simulator is not None:
        return simulate(cfg.simulator)
    return ingest_csv(cfg.data_path)


def prepare_experiment(
    cfg: ExperimentConfig, dataset: Dataset | None = None
) -> PreparedExperiment:
    """Split, preprocess, fold, and augment; no training happens here.

    `dataset` overrides the configured data source (used by tests that
    construct datasets in memory).
    """
    cfg.validate()
    full = dataset if dataset is not None else _load_dataset(cfg)
    train_raw, test_raw = stratified_split(full, cfg.test_fraction, cfg.master_seed)
    train, state = fit_preprocessor(train_raw, cfg.preprocess)
    test = apply_preprocessor(state, test_raw)
    folds = stratified_kfold(train, cfg.folds, cfg.master_seed)

    augment_seeds = derive_rng(cfg.master_seed, TAG_AUGMENT).integers(
        0, _SEED_BOUND, size=cfg.folds
    )
    fold_data = []
    for index, (train_idx, val_idx) in enumerate(folds):
        fold_train = train.subset(train_idx)
        fold_val = train.subset(val_idx)
        weights = None
        lineage = ()
        if cfg.imbalance_mode == "smote":
            fold_train = build_variant(
                fold_train, cfg.variant, int(augment_seeds[index]), k=cfg.smote_k
            )
            lineage = tuple(fold_train.metadata.get("smote_lineage", ()))
        elif cfg.imbalance_mode == "class_weights":
            weights = class_weights(fold_train.class_counts()).as_array()
        train_x, train_y = as_arrays(fold_train)
        val_x, val_y = as_arrays(fold_val)
        fold_data.append(
            FoldData(
                fold_index=index,
                train_x=train_x,
                train_y=train_y,
                val_x=val_x,
                val_y=val_y,
                weights=weights,
                train_ids=fold_train.sample_ids,
                val_ids=fold_val.sample_ids,
                lineage=lineage,
            )
        )
    input_shape = train.samples[0].channels.shape
    return PreparedExperiment(
        config=cfg,
        train=train,
        test=test,
        preprocessor_state=state,
        folds=tuple(folds),
        fold_data=tuple(fold_data),
        input_shape=input_shape,
    )


def run_trial(
    cfg: ExperimentConfig,
    hp: HyperParams,
    fold_data,
    trial_index: int = 0,
    trial_seed: int = 0,
) -> TrialRecord:
    """Train one model per fold; a diverging or unbuildable configuration
    yields a failed record with objective 0 instead of raising."""
    start = time.perf_counter()
    reports = []
    parameter_count = None
    failed = False
    reason = None
    shuffle_seeds = derive_rng(trial_seed, TAG_SHUFFLE).integers(
        0, _SEED_BOUND, size=len(fold_data)
    )
    try:
        with np.errstate(over="ignore", invalid="ignore"):
            for fold in fold_data:
                model = build_model(
                    hp,
                    tuple(fold.train_x.shape[1:]),
                    derive_rng(trial_seed, TAG_INIT, fold.fold_index),
                )
                if parameter_count is None:
                    parameter_count = count_parameters(model)
                train_model(
                    model,
                    fold.train_x,
                    fold.train_y,
                    cfg.training,
                    class_weights=fold.weights,
                    seed=int(shuffle_seeds[fold.fold_index]),
                )
                reports.append(evaluate_model(model, fold.val_x, fold.val_y))
        value = objective(reports)
    except (ConfigurationError, TrainingDiverged, NumericError) as exc:
        failed = True
        reason = f"{type(exc).__name__}: {exc}"
        value = 0.0
    return TrialRecord(
        trial_index=trial_index,
        seed=trial_seed,
        hyperparams=hp,
        fold_reports=tuple(reports),
        objective=value,
        parameter_count=parameter_count,
        duration_seconds=time.perf_counter() - start,
        failed=failed,
        failure_reason=reason,
    )


def _trial_worker(args):
    cfg, hp, fold_data, index, seed = args
    return run_trial(cfg, hp, fold_data, trial_index=index, trial_seed=seed)


def select_best(records) -> TrialRecord:
    """Highest objective; ties break toward fewer parameters, then lower
    trial index. Failed trials are never chosen; all-failed is an error."""
    alive = [r for r in records if not r.failed]
    if not alive:
        reasons = {r.failure_reason for r in records}
        raise ExperimentFailure(
            f"all {len(list(records))} trials failed; reasons: {sorted(reasons)}"
        )
    return min(
        alive,
        key=lambda r: (
            -r.objective,
            r.parameter_count if r.parameter_count is not None else np.inf,
            r.trial_index,
        ),
    )


def optimize(
    cfg: ExperimentConfig,
    dataset: Dataset | None = None,
    records_path=None,
    jobs: int = 1,
) -> ExperimentResult:
    """Run the full experiment; optionally append each record to a file."""
    cfg.validate()
    prepared = prepare_experiment(cfg, dataset)
    trial_seeds = derive_rng(cfg.master_seed, TAG_SAMPLING).integers(
        0, _SEED_BOUND, size=cfg.trials
    )
    tasks = [
        (
            cfg,
            sample_hyperparams(cfg.model_kind, int(trial_seeds[i])),
            prepared.fold_data,
            i,
            int(trial_seeds[i]),
        )
        for i in range(cfg.trials)
    ]

    writer = open(records_path, "w", encoding="utf-8") if records_path else None
    records = []
    try:
        if jobs > 1:
            import multiprocessing

            with multiprocessing.Pool(processes=jobs) as pool:
                iterator = pool.imap(_trial_worker, tasks)
                for record in iterator:
                    records.append(record)
                    if writer:
                        writer.write(json.dumps(record.to_dict()) + "\n")
                        writer.flush()
        else:
            for task in tasks:
                record = _trial_worker(task)
                records.append(record)
                if writer:
                    writer.write(json.dumps(record.to_dict()) + "\n")
                    writer.flush()
    finally:
        if writer:
            writer.close()

    best = select_best(records)

    final_rng = derive_rng(cfg.master_seed, TAG_FINAL)
    final_augment_seed = int(final_rng.integers(0, _SEED_BOUND))
    final_shuffle_seed = int(final_rng.integers(0, _SEED_BOUND))
    full_train = prepared.train
    weights = None
    if cfg.imbalance_mode == "smote":
        full_train = build_variant(
            full_train, cfg.variant, final_augment_seed, k=cfg.smote_k
        )
    elif cfg.imbalance_mode == "class_weights":
        weights = class_weights(full_train.class_counts()).as_array()
    train_x, train_y = as_arrays(full_train)
    test_x, test_y = as_arrays(prepared.test)
    try:
        with np.errstate(over="ignore", invalid="ignore"):
            final_model = build_model(
                best.hyperparams, prepared.input_shape, final_rng
            )
            train_model(
                final_model,
                train_x,
                train_y,
                cfg.training,
                class_weights=weights,
                seed=final_shuffle_seed,
            )
            test_report = evaluate_model(final_model, test_x, test_y)
    except (TrainingDiverged, NumericError) as exc:
        raise ExperimentFailure(
            f"final retraining of the best trial failed: {exc}"
        ) from exc

    return ExperimentResult(
        config=cfg,
        records=tuple(records),
        best=best,
        final_model=final_model,
        test_report=test_report,
        fold_validation_ids=tuple(f.val_ids for f in prepared.fold_data),
        train_sample_ids=prepared.train.sample_ids,
        test_sample_ids=prepared.test.sample_ids,
    )


def fold_metric_values(view, metric: str):
    """Per-fold values of one metric from a result's best trial; undefined
    metrics count as 0 (a model that never finds the class earns nothing)."""
    if metric not in METRIC_SELECTORS:
        raise ConfigurationError(
            f"metric must be one of {METRIC_SELECTORS}, got {metric!r}"
        )
    values = []
    for report in view.fold_reports:
        value = getattr(report, metric)
        values.append(0.0 if value is None else float(value))
    return values


def compare(results, metric: str = "mounted_precision") -> PairwiseComparison:
    """Pairwise paired t-tests over per-fold metrics of each best trial.

    All results must share fold definitions (same fold seed and data);
    per-fold values are then paired by fold index.
    """
    views = [
        ResultView.from_result(r) if isinstance(r, ExperimentResult) else r
        for r in results
    ]
    if len(views) < 2:
        raise ConfigurationError("compare needs at least two results")
    reference = views[0].fold_validation_ids
    for view in views[1:]:
        if view.fold_validation_ids != reference:
            raise ConfigurationError(
                f"fold definitions of {view.name!r} do not match "
                f"{views[0].name!r}; experiments must share fold seed and data"
            )
    entries = {}
    for i in range(len(views)):
        for j in range(i + 1, len(views)):
            entries[(i, j)] = paired_ttest(
                fold_metric_values(views[i], metric),
                fold_metric_values(views[j], metric),
            )
    return PairwiseComparison(
        metric=metric,
        names=tuple(v.name for v in views),
        entries=entries,
    )
