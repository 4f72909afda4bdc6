"""Class-imbalance handling: SMOTE oversampling, dataset variants, weights.

Three strategies are supported for the skewed outcome distribution of
screwing attempts:

* ``original`` - train on the data as recorded;
* ``balanced`` - SMOTE the minority classes up to the majority count;
* ``synthetic`` - SMOTE *every* class (majority included) to a multiple of
  the majority count, yielding a mostly-synthetic equal-count set;
* cost-sensitive training via :func:`class_weights` (used with the weighted
  cross-entropy loss rather than by resampling).

SMOTE interpolates in the flattened ``[C*S]`` vector space of preprocessed
samples: a synthetic point is ``x + r*(x_nn - x)`` for a random neighbor
``x_nn`` among the k nearest same-class originals and ``r`` drawn uniformly
from [0, 1).  Original samples are always preserved verbatim.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .datasets import (
    LABEL_NAMES,
    NUM_CLASSES,
    Dataset,
    ScrewingSample,
)
from .errors import ConfigurationError, DegenerateInputError
from .seeding import TAG_AUGMENT, derive_rng

__all__ = [
    "SmoteConfig",
    "VariantSpec",
    "ClassWeights",
    "VARIANTS",
    "smote_oversample",
    "build_variant",
    "class_weights",
]

VARIANTS = ("original", "balanced", "synthetic")


@dataclass(frozen=True)
class SmoteConfig:
    """Oversampling parameters: neighbor count, per-class targets, seed."""

    targets: tuple[int, int, int]
    k: int = 5
    seed: int = 0

    def validate(self) -> None:
        if len(self.targets) != NUM_CLASSES:
            raise ConfigurationError(
                f"targets needs one entry per class, got {len(self.targets)}"
            )
        if any(int(t) < 0 for t in self.targets):
            raise ConfigurationError(
                f"targets must be >= 0, got {self.targets}"
            )
        if self.k < 1:
            raise ConfigurationError(f"k must be >= 1, got {self.k}")


@dataclass(frozen=True)
class VariantSpec:
    """Which training-set variant to build; multiplier applies to synthetic."""

    variant: str
    multiplier: int = 4

    def validate(self) -> None:
        if self.variant not in VARIANTS:
            raise ConfigurationError(
                f"variant must be one of {VARIANTS}, got {self.variant!r}"
            )
        if self.multiplier < 1:
            raise ConfigurationError(
                f"multiplier must be >= 1, got {self.multiplier}"
            )


@dataclass(frozen=True)
class ClassWeights:
    """Strictly positive per-class loss weights."""

    weights: np.ndarray

    def __post_init__(self) -> None:
        arr = np.array(self.weights, dtype=np.float64)
        if arr.shape != (NUM_CLASSES,):
            raise ConfigurationError(
                f"expected {NUM_CLASSES} weights, got shape {arr.shape}"
            )
        if not np.isfinite(arr).all() or not (arr > 0).all():
            raise ConfigurationError(
                f"class weights must be finite and positive, got {arr}"
            )
        arr.flags.writeable = False
        object.__setattr__(self, "weights", arr)

    def as_array(self) -> np.ndarray:
        return self.weights


def _uniform_shape(ds: Dataset) -> tuple[int, int]:
    shapes = {s.channels.shape for s in ds}
    if len(shapes) != 1:
        raise ConfigurationError(
            f"SMOTE needs uniformly shaped samples, found shapes "
            f"{sorted(shapes)}; preprocess first"
        )
    return next(iter(shapes))


def _k_nearest(flat: np.ndarray, k: int) -> np.ndarray:
    """Indices [n, k] of each row's k nearest other rows (Euclidean)."""
    deltas = flat[:, None, :] - flat[None, :, :]
    distances = np.sqrt((deltas**2).sum(axis=2))
    np.fill_diagonal(distances, np.inf)
    return np.argsort(distances, axis=1, kind="stable")[:, :k]


def smote_oversample(train: Dataset, cfg: SmoteConfig) -> Dataset:
    """Oversample each class up to its target count with SMOTE.

    Originals are preserved verbatim; synthetic samples are appended per
    class with provenance ``synthetic`` and ids ``smote-<class>-<n>``.  The
    lineage of every synthetic point (base id, neighbor id) is recorded in
    the result's ``metadata["smote_lineage"]``.
    """
    cfg.validate()
    if len(train) == 0:
        raise DegenerateInputError("cannot oversample an empty dataset")
    shape = _uniform_shape(train)

    counts = train.class_counts()
    for label in range(NUM_CLASSES):
        target = int(cfg.targets[label])
        current = int(counts[label])
        if target < current:
            raise ConfigurationError(
                f"target {target} for class '{LABEL_NAMES[label]}' is below "
                f"its current count {current}"
            )
        if target > current and current < cfg.k + 1:
            raise ConfigurationError(
                f"class '{LABEL_NAMES[label]}' has {current} sample(s); "
                f"SMOTE with k={cfg.k} needs at least {cfg.k + 1}"
            )

    synthetic: list[ScrewingSample] = []
    lineage: list[tuple[str, str, str]] = []
    for label in range(NUM_CLASSES):
        need = int(cfg.targets[label]) - int(counts[label])
        if need <= 0:
            continue
        members = [s for s in train if s.label == label]
        flat = np.stack([s.channels.ravel() for s in members])
        neighbors = _k_nearest(flat, cfg.k)

        rng = derive_rng(cfg.seed, TAG_AUGMENT, label)
        base_choices = rng.integers(0, len(members), size=need)
        neighbor_choices = rng.integers(0, cfg.k, size=need)
        ratios = rng.random(size=need)
        for i in range(need):
            base = int(base_choices[i])
            nn = int(neighbors[base, neighbor_choices[i]])
            r = float(ratios[i])
            point = flat[base] + r * (flat[nn] - flat[base])
            sample_id = f"smote-{LABEL_NAMES[label]}-{i:04d}"
            synthetic.append(
                ScrewingSample(
                    point.reshape(shape), label, sample_id, "synthetic"
                )
            )
            lineage.append(
                (sample_id, members[base].sample_id, members[nn].sample_id)
            )

    return train.replace_samples(
        train.samples + tuple(synthetic),
        smote_lineage=tuple(lineage),
        smote_k=int(cfg.k),
        smote_seed=int(cfg.seed),
    )


def build_variant(
    train: Dataset, spec: VariantSpec, seed: int, k: int = 5
) -> Dataset:
    """Construct the original / balanced / synthetic training variant."""
    spec.validate()
    if spec.variant == "original":
        return train.replace_samples(train.samples, variant="original")

    majority = int(train.class_counts().max())
    if spec.variant == "balanced":
        targets = (majority, majority, majority)
    else:  # synthetic
        per_class = majority * int(spec.multiplier)
        targets = (per_class, per_class, per_class)
    augmented = smote_oversample(
        train, SmoteConfig(targets=targets, k=k, seed=seed)
    )
    return augmented.replace_samples(augmented.samples, variant=spec.variant)


def class_weights(counts) -> ClassWeights:
    """Inverse-frequency weights ``w_c = N / (3 * n_c)``.

    Balanced counts give all-ones; the weighted sample mass of every class
    is the same, so rare classes contribute equally to the loss.
    """
    arr = np.asarray(counts, dtype=np.float64)
    if arr.shape != (NUM_CLASSES,):
        raise ConfigurationError(
            f"expected {NUM_CLASSES} class counts, got shape {arr.shape}"
        )
    if (arr <= 0).any():
        empty = [LABEL_NAMES[i] for i in np.flatnonzero(arr <= 0)]
        raise ConfigurationError(
            f"class weights need every class present; zero count for "
            f"{', '.join(empty)}"
        )
    total = arr.sum()
    return ClassWeights(total / (NUM_CLASSES * arr))
