"""Preprocessing chain for screwing recordings.

Order of operations (fitted on training data only, then frozen):

1. channel selection (optionally drop the kinematic channels),
2. outlier cleaning by per-channel mean z-score,
3. truncation to a fixed number of time steps,
4. Piecewise Aggregate Approximation (PAA) down to S frames,
5. per-channel standardization with training statistics.

The :func:`fit_preprocessor` / :func:`apply_preprocessor` pair bundles the
chain so evaluation data can never influence the fitted state: cleaning and
statistic fitting see the training set alone, and held-out samples are only
selected, truncated, aggregated, and shifted by the frozen statistics.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .datasets import (
    FORCE_TORQUE_CHANNELS,
    LABEL_NAMES,
    Dataset,
    ScrewingSample,
)
from .errors import ConfigurationError, DegenerateInputError

__all__ = [
    "PreprocessConfig",
    "CleaningReport",
    "NormalizationStats",
    "PreprocessorState",
    "select_channels",
    "clean_outliers",
    "truncate",
    "min_length",
    "paa",
    "paa_matrix",
    "fit_normalizer",
    "apply_normalizer",
    "fit_preprocessor",
    "apply_preprocessor",
]


@dataclass(frozen=True)
class PreprocessConfig:
    """Chain parameters.

    ``target_length`` of ``None`` means "shortest training sample after
    cleaning".  ``segments`` is the PAA output length S.  When
    ``include_rotation`` is false only the six force/torque channels are
    kept.
    """

    z_threshold: float = 4.0
    target_length: int | None = None
    segments: int = 64
    include_rotation: bool = True

    def validate(self) -> None:
        if not self.z_threshold > 0:
            raise ConfigurationError(
                f"z_threshold must be positive, got {self.z_threshold}"
            )
        if self.segments < 1:
            raise ConfigurationError(
                f"segments must be >= 1, got {self.segments}"
            )
        if self.target_length is not None:
            if self.target_length < 1:
                raise ConfigurationError(
                    f"target_length must be >= 1, got {self.target_length}"
                )
            if self.segments > self.target_length:
                raise ConfigurationError(
                    f"segments ({self.segments}) cannot exceed target_length "
                    f"({self.target_length})"
                )


@dataclass(frozen=True)
class CleaningReport:
    """Outcome of :func:`clean_outliers`."""

    threshold: float
    removed_ids: tuple[str, ...]
    reasons: dict[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        object.__setattr__(self, "removed_ids", tuple(self.removed_ids))
        object.__setattr__(self, "reasons", dict(self.reasons))


@dataclass(frozen=True)
class NormalizationStats:
    """Per-channel mean/std fitted on training data."""

    channel_names: tuple[str, ...]
    mean: np.ndarray
    std: np.ndarray

    def __post_init__(self) -> None:
        mean = np.array(self.mean, dtype=np.float64)
        std = np.array(self.std, dtype=np.float64)
        names = tuple(self.channel_names)
        if mean.shape != (len(names),) or std.shape != (len(names),):
            raise ConfigurationError(
                "normalization stats must carry one mean/std per channel"
            )
        if not (std > 0).all():
            bad = [names[i] for i in np.flatnonzero(std <= 0)]
            raise ConfigurationError(
                f"non-positive standard deviation for channel(s) "
                f"{', '.join(bad)}"
            )
        mean.flags.writeable = False
        std.flags.writeable = False
        object.__setattr__(self, "channel_names", names)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "std", std)


def select_channels(ds: Dataset, include_rotation: bool) -> Dataset:
    """Keep all channels, or only the six force/torque ones."""
    if include_rotation:
        if len(ds.channel_names) != 8:
            raise ConfigurationError(
                "include_rotation=True requires the kinematic channels, but "
                f"the dataset carries only {ds.channel_names}"
            )
        return ds
    if ds.channel_names == FORCE_TORQUE_CHANNELS:
        return ds
    keep = [
        i
        for i, name in enumerate(ds.channel_names)
        if name in FORCE_TORQUE_CHANNELS
    ]
    if len(keep) != len(FORCE_TORQUE_CHANNELS):
        raise ConfigurationError(
            f"dataset lacks the force/torque channels "
            f"{FORCE_TORQUE_CHANNELS}, found {ds.channel_names}"
        )
    names = tuple(ds.channel_names[i] for i in keep)
    samples = tuple(
        ScrewingSample(s.channels[keep, :], s.label, s.sample_id, s.provenance)
        for s in ds
    )
    return Dataset(samples, names, dict(ds.metadata))


def clean_outliers(
    ds: Dataset, z_threshold: float
) -> tuple[Dataset, CleaningReport]:
    """Drop samples whose channel-mean z-score exceeds the threshold.

    For every sample the per-channel signal means are compared against the
    dataset-wide distribution of those means; a sample is removed when its
    worst channel deviates by more than ``z_threshold`` standard deviations.
    Refuses (with an error) to empty any class.
    """
    if not z_threshold > 0:
        raise ConfigurationError(
            f"z_threshold must be positive, got {z_threshold}"
        )
    if len(ds) == 0:
        raise DegenerateInputError("cannot clean an empty dataset")

    channel_means = np.stack([s.channels.mean(axis=1) for s in ds])  # [N, C]
    mu = channel_means.mean(axis=0)
    sd = channel_means.std(axis=0)
    safe_sd = np.where(sd > 0, sd, np.inf)
    z = np.abs((channel_means - mu) / safe_sd)  # [N, C]
    worst_channel = np.argmax(z, axis=1)
    worst_score = z[np.arange(len(ds)), worst_channel]

    removed_ids: list[str] = []
    reasons: dict[str, str] = {}
    kept: list[ScrewingSample] = []
    for i, sample in enumerate(ds):
        if worst_score[i] > z_threshold:
            name = ds.channel_names[worst_channel[i]]
            removed_ids.append(sample.sample_id)
            reasons[sample.sample_id] = (
                f"channel '{name}' mean deviates by {worst_score[i]:.2f} "
                f"standard deviations (threshold {z_threshold:g})"
            )
        else:
            kept.append(sample)

    for label, before in enumerate(ds.class_counts()):
        after = sum(1 for s in kept if s.label == label)
        if before > 0 and after == 0:
            raise DegenerateInputError(
                f"outlier cleaning at threshold {z_threshold:g} would remove "
                f"every '{LABEL_NAMES[label]}' sample "
                f"({', '.join(sorted(reasons))}); refusing"
            )

    report = CleaningReport(float(z_threshold), tuple(removed_ids), reasons)
    cleaned = ds.replace_samples(kept, outliers_removed=tuple(removed_ids))
    return cleaned, report


def min_length(ds: Dataset) -> int:
    if len(ds) == 0:
        raise DegenerateInputError("empty dataset has no minimum length")
    return min(s.length for s in ds)


def truncate(ds: Dataset, target_length: int) -> Dataset:
    """Keep the first ``target_length`` steps of every sample."""
    if target_length < 1:
        raise ConfigurationError(
            f"target_length must be >= 1, got {target_length}"
        )
    offenders = [s.sample_id for s in ds if s.length < target_length]
    if offenders:
        raise ConfigurationError(
            f"samples shorter than {target_length} steps: "
            f"{', '.join(offenders)}"
        )
    samples = tuple(
        s
        if s.length == target_length
        else ScrewingSample(
            s.channels[:, :target_length], s.label, s.sample_id, s.provenance
        )
        for s in ds
    )
    return ds.replace_samples(samples)


def paa_matrix(length: int, segments: int) -> np.ndarray:
    """Row-stochastic [S, T] averaging matrix with fractional-overlap weights.

    Output frame ``j`` covers the real interval ``[j*T/S, (j+1)*T/S)``; each
    input step contributes to a frame in proportion to its overlap with that
    interval.  This preserves the series mean exactly for any S <= T.
    """
    if not 1 <= segments <= length:
        raise ConfigurationError(
            f"segments must lie in [1, {length}], got {segments}"
        )
    frame_len = length / segments
    starts = np.arange(segments) * frame_len  # [S]
    ends = starts + frame_len
    steps = np.arange(length)  # [T]
    overlap = np.minimum(ends[:, None], steps + 1.0) - np.maximum(
        starts[:, None], steps
    )
    return np.clip(overlap, 0.0, None) / frame_len


def paa(channels: np.ndarray, segments: int) -> np.ndarray:
    """Piecewise Aggregate Approximation of a [C, T] matrix to [C, S]."""
    channels = np.asarray(channels, dtype=np.float64)
    if channels.ndim != 2:
        raise ConfigurationError(
            f"paa expects a [C, T] matrix, got shape {channels.shape}"
        )
    weights = paa_matrix(channels.shape[1], segments)
    return channels @ weights.T


def _paa_dataset(ds: Dataset, segments: int) -> Dataset:
    samples = tuple(
        ScrewingSample(paa(s.channels, segments), s.label, s.sample_id, s.provenance)
        for s in ds
    )
    return ds.replace_samples(samples)


def fit_normalizer(train: Dataset) -> NormalizationStats:
    """Fit per-channel mean/std over all training samples and time steps."""
    if len(train) == 0:
        raise DegenerateInputError("cannot fit a normalizer on no samples")
    pooled = np.concatenate([s.channels for s in train], axis=1)  # [C, sum T]
    mean = pooled.mean(axis=1)
    std = pooled.std(axis=1)
    degenerate = np.flatnonzero(std <= 0)
    if degenerate.size:
        bad = ", ".join(train.channel_names[i] for i in degenerate)
        raise DegenerateInputError(
            f"channel(s) {bad} have zero variance on the training data; "
            f"cannot standardize"
        )
    return NormalizationStats(train.channel_names, mean, std)


def apply_normalizer(stats: NormalizationStats, ds: Dataset) -> Dataset:
    """Standardize every sample with the fitted (training) statistics."""
    if stats.channel_names != ds.channel_names:
        raise ConfigurationError(
            f"normalizer was fitted on channels {stats.channel_names} but "
            f"the dataset carries {ds.channel_names}"
        )
    mean = stats.mean[:, None]
    std = stats.std[:, None]
    samples = tuple(
        ScrewingSample((s.channels - mean) / std, s.label, s.sample_id, s.provenance)
        for s in ds
    )
    return ds.replace_samples(samples)


@dataclass(frozen=True)
class PreprocessorState:
    """Frozen result of fitting the chain on a training set."""

    config: PreprocessConfig
    target_length: int
    stats: NormalizationStats
    cleaning: CleaningReport


def fit_preprocessor(
    train: Dataset, config: PreprocessConfig
) -> tuple[Dataset, PreprocessorState]:
    """Fit the full chain on training data; returns (processed train, state)."""
    config.validate()
    selected = select_channels(train, config.include_rotation)
    cleaned, report = clean_outliers(selected, config.z_threshold)
    target = (
        config.target_length
        if config.target_length is not None
        else min_length(cleaned)
    )
    if config.segments > target:
        raise ConfigurationError(
            f"segments ({config.segments}) exceed the resolved target length "
            f"({target})"
        )
    truncated = truncate(cleaned, target)
    aggregated = _paa_dataset(truncated, config.segments)
    stats = fit_normalizer(aggregated)
    processed = apply_normalizer(stats, aggregated)
    state = PreprocessorState(config, target, stats, report)
    return processed, state


def apply_preprocessor(state: PreprocessorState, ds: Dataset) -> Dataset:
    """Run held-out data through the frozen chain (no cleaning, no fitting)."""
    selected = select_channels(ds, state.config.include_rotation)
    truncated = truncate(selected, state.target_length)
    aggregated = _paa_dataset(truncated, state.config.segments)
    return apply_normalizer(state.stats, aggregated)
