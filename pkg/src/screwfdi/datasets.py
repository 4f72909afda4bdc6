"""Data model for screwing-assembly recordings.

A recording is a multichannel time series captured while a robot drives a
threaded collar: three force channels (newtons), three torque channels
(newton-meters), and optionally tool displacement (millimeters) and rotation
angle (radians).  Each recording carries one of three outcome labels:

* ``mounted`` (0) - the collar seated and tightened correctly,
* ``not_mounted`` (1) - the thread never engaged,
* ``jammed`` (2) - the collar seized partway down.

The module provides the immutable sample/dataset containers, CSV ingestion
for recorded data, a parametric simulator that produces desk-scale datasets
with the same qualitative physics, and stratified splitting utilities.
"""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

from .errors import ConfigurationError, DegenerateInputError, IngestionError
from .seeding import TAG_FOLDS, TAG_SAMPLING, TAG_SPLIT, derive_rng

__all__ = [
    "LABEL_NAMES",
    "LABEL_TO_INDEX",
    "MOUNTED",
    "NOT_MOUNTED",
    "JAMMED",
    "FORCE_TORQUE_CHANNELS",
    "KINEMATIC_CHANNELS",
    "DEFAULT_CHANNEL_NAMES",
    "ScrewingSample",
    "Dataset",
    "SimulatorConfig",
    "simulate",
    "ingest_csv",
    "save_dataset",
    "as_arrays",
    "stratified_split",
    "stratified_kfold",
]

MOUNTED = 0
NOT_MOUNTED = 1
JAMMED = 2

LABEL_NAMES = ("mounted", "not_mounted", "jammed")
LABEL_TO_INDEX = {name: index for index, name in enumerate(LABEL_NAMES)}
NUM_CLASSES = len(LABEL_NAMES)

FORCE_TORQUE_CHANNELS = ("Fx", "Fy", "Fz", "Tx", "Ty", "Tz")
KINEMATIC_CHANNELS = ("Dz", "Rz")
DEFAULT_CHANNEL_NAMES = FORCE_TORQUE_CHANNELS + KINEMATIC_CHANNELS

_VALID_CHANNEL_COUNTS = (6, 8)


_PROVENANCES = ("original", "synthetic")


@dataclass(frozen=True)
class ScrewingSample:
    """One assembly attempt: a ``[C, T]`` channel matrix plus outcome label.

    ``provenance`` distinguishes recorded/simulated attempts (``original``)
    from oversampling products (``synthetic``).
    """

    channels: np.ndarray
    label: int
    sample_id: str
    provenance: str = "original"

    def __post_init__(self) -> None:
        if self.provenance not in _PROVENANCES:
            raise ConfigurationError(
                f"sample '{self.sample_id}': provenance must be one of "
                f"{_PROVENANCES}, got {self.provenance!r}"
            )
        arr = np.array(self.channels, dtype=np.float64, order="C")
        if arr.ndim != 2:
            raise ConfigurationError(
                f"sample '{self.sample_id}': channels must be 2-D [C, T], "
                f"got shape {arr.shape}"
            )
        if arr.shape[1] < 1:
            raise ConfigurationError(
                f"sample '{self.sample_id}': needs at least one time step"
            )
        if not np.isfinite(arr).all():
            raise ConfigurationError(
                f"sample '{self.sample_id}': channels contain non-finite values"
            )
        if self.label not in (MOUNTED, NOT_MOUNTED, JAMMED):
            raise ConfigurationError(
                f"sample '{self.sample_id}': label must be 0, 1 or 2, "
                f"got {self.label!r}"
            )
        arr.flags.writeable = False
        object.__setattr__(self, "channels", arr)

    @property
    def num_channels(self) -> int:
        return self.channels.shape[0]

    @property
    def length(self) -> int:
        return self.channels.shape[1]

    @property
    def label_name(self) -> str:
        return LABEL_NAMES[self.label]


@dataclass(frozen=True)
class Dataset:
    """Immutable ordered collection of samples sharing one channel layout."""

    samples: tuple[ScrewingSample, ...]
    channel_names: tuple[str, ...]
    metadata: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        object.__setattr__(self, "samples", tuple(self.samples))
        object.__setattr__(self, "channel_names", tuple(self.channel_names))
        object.__setattr__(self, "metadata", dict(self.metadata))
        if len(self.channel_names) not in _VALID_CHANNEL_COUNTS:
            raise ConfigurationError(
                f"datasets carry 6 (force/torque) or 8 (plus kinematics) "
                f"channels, got {len(self.channel_names)}"
            )
        seen: set[str] = set()
        for sample in self.samples:
            if sample.sample_id in seen:
                raise ConfigurationError(
                    f"duplicate sample_id '{sample.sample_id}'"
                )
            seen.add(sample.sample_id)
            if sample.num_channels != len(self.channel_names):
                raise ConfigurationError(
                    f"sample '{sample.sample_id}' has {sample.num_channels} "
                    f"channels but the dataset names {len(self.channel_names)}"
                )

    def __len__(self) -> int:
        return len(self.samples)

    def __iter__(self) -> Iterator[ScrewingSample]:
        return iter(self.samples)

    def __getitem__(self, index: int) -> ScrewingSample:
        return self.samples[index]

    @property
    def labels(self) -> np.ndarray:
        return np.array([s.label for s in self.samples], dtype=np.int64)

    @property
    def sample_ids(self) -> tuple[str, ...]:
        return tuple(s.sample_id for s in self.samples)

    def class_counts(self) -> np.ndarray:
        counts = np.zeros(NUM_CLASSES, dtype=np.int64)
        for sample in self.samples:
            counts[sample.label] += 1
        return counts

    def class_indices(self, label: int) -> np.ndarray:
        return np.array(
            [i for i, s in enumerate(self.samples) if s.label == label],
            dtype=np.int64,
        )

    def subset(self, indices: Sequence[int], **metadata_updates) -> "Dataset":
        picked = tuple(self.samples[int(i)] for i in indices)
        meta = dict(self.metadata)
        meta.update(metadata_updates)
        return Dataset(picked, self.channel_names, meta)

    def replace_samples(
        self, samples: Sequence[ScrewingSample], **metadata_updates
    ) -> "Dataset":
        meta = dict(self.metadata)
        meta.update(metadata_updates)
        return Dataset(tuple(samples), self.channel_names, meta)


def as_arrays(ds: Dataset) -> tuple[np.ndarray, np.ndarray]:
    """Stack a length-uniform dataset into ``(X [N,C,T], y [N])`` arrays."""
    if len(ds) == 0:
        raise DegenerateInputError("cannot stack an empty dataset")
    lengths = {s.length for s in ds}
    if len(lengths) != 1:
        raise DegenerateInputError(
            f"samples have differing lengths {sorted(lengths)}; "
            f"truncate before stacking"
        )
    X = np.stack([s.channels for s in ds]).astype(np.float64)
    return X, ds.labels


# ---------------------------------------------------------------------------
# Simulator
# ---------------------------------------------------------------------------

# Additive sensor noise is scaled per channel: force channels are the
# noisiest, torque sensors less so, kinematic encoders least.
_CHANNEL_NOISE_SCALE = np.array([1.0, 1.0, 1.0, 0.6, 0.6, 0.6, 0.4, 0.3])

# Offset magnitude used for injected corrupted samples; far outside the
# envelope of any simulated signal so a modest z-threshold isolates them.
_CORRUPTION_OFFSET = 60.0


@dataclass(frozen=True)
class SimulatorConfig:
    """Parameters of the desk-scale screwing simulator.

    ``counts`` gives the number of samples per class in label order
    (mounted, not_mounted, jammed).  ``noise`` scales *all* stochastic
    variation - additive sensor noise and per-sample parameter jitter - so
    ``noise=0`` produces identical samples within each class.

    ``ramp_slope`` sets the mounted-class tightening torque rise,
    ``plateau_level`` the low flat torque of a never-engaged thread, and
    ``spike_height`` the abrupt torque jump of a jam.

    ``length_jitter`` optionally shortens individual recordings by up to
    that many steps (exercises truncation); ``corrupt_count`` replaces that
    many samples with sensor-fault copies whose ids are listed in the
    resulting dataset's ``metadata["corrupted_ids"]``.
    """

    counts: tuple[int, int, int]
    length: int = 96
    noise: float = 0.1
    ramp_slope: float = 2.0
    plateau_level: float = 0.25
    spike_height: float = 2.5
    seed: int = 0
    length_jitter: int = 0
    corrupt_count: int = 0

    def validate(self) -> None:
        if len(self.counts) != NUM_CLASSES:
            raise ConfigurationError(
                f"counts needs one entry per class, got {len(self.counts)}"
            )
        if any(int(c) < 0 for c in self.counts):
            raise ConfigurationError(f"counts must be >= 0, got {self.counts}")
        if self.length < 8:
            raise ConfigurationError(
                f"series length must be >= 8, got {self.length}"
            )
        if self.noise < 0:
            raise ConfigurationError(
                f"noise amplitude must be >= 0, got {self.noise}"
            )
        if self.length_jitter < 0 or self.length_jitter > self.length - 8:
            raise ConfigurationError(
                f"length_jitter must lie in [0, length-8], "
                f"got {self.length_jitter}"
            )
        if self.corrupt_count < 0 or self.corrupt_count > sum(self.counts):
            raise ConfigurationError(
                f"corrupt_count must lie in [0, total samples], "
                f"got {self.corrupt_count}"
            )


def _sigmoid(x: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-np.clip(x, -60.0, 60.0)))


def _simulate_one(
    label: int, cfg: SimulatorConfig, rng: np.random.Generator
) -> np.ndarray:
    """Generate one [8, T] recording with the class signature injected."""
    noise = cfg.noise
    if cfg.length_jitter > 0:
        T = cfg.length - int(rng.integers(0, cfg.length_jitter + 1))
    else:
        T = cfg.length
    t = np.linspace(0.0, 1.0, T)

    # Per-sample parameter jitter, proportional to the noise amplitude so a
    # noiseless simulator emits identical samples per class.
    def jitter(scale: float) -> float:
        return 1.0 + noise * scale * float(rng.standard_normal())

    omega = 6.0 * math.pi * jitter(0.05)  # total tool rotation ~3 turns
    phase = noise * float(rng.standard_normal())

    wobble = 0.3 * np.sin(4.0 * math.pi * t + phase)
    fx = wobble.copy()
    fy = 0.3 * np.cos(4.0 * math.pi * t + phase)
    tx = 0.05 * np.sin(2.0 * math.pi * t + phase)
    ty = 0.05 * np.cos(2.0 * math.pi * t + phase)

    if label == MOUNTED:
        # Thread engages, the collar advances to seat depth, then torque
        # ramps up to the tightening peak while rotation continues.
        engage = min(max(0.55 * jitter(0.15), 0.2), 0.85)
        progress = np.clip((t - engage) / (1.0 - engage), 0.0, 1.0)
        tz = 0.25 + 0.1 * t + cfg.ramp_slope * jitter(0.1) * progress**2
        fz = 0.8 + 0.5 * t + 4.0 * progress**2
        dz = 6.0 * np.minimum(t / engage, 1.0)
        rz = omega * t
    elif label == NOT_MOUNTED:
        # Thread never engages: brief early rise then a low flat plateau,
        # almost no advance, free spinning.
        onset = min(max(0.15 * jitter(0.2), 0.05), 0.4)
        rise = np.clip(t / onset, 0.0, 1.0)
        tz = cfg.plateau_level * jitter(0.2) * rise
        fz = 0.5 * rise + 0.2 * t
        dz = 1.2 * rise
        rz = omega * t
    else:
        # Jam: the collar tracks the mounted trajectory, then seizes
        # mid-series - abrupt torque spike that saturates, advance and
        # rotation stall.
        t_jam = min(max(0.5 + 0.12 * noise * float(rng.standard_normal()), 0.15), 0.9)
        s = _sigmoid((t - t_jam) / 0.02)
        tz = 0.25 + 0.1 * t + cfg.spike_height * jitter(0.1) * s
        fz = 0.8 + 0.3 * t + 3.5 * s
        dz = (6.0 / 0.55) * np.minimum(t, t_jam)
        rz = omega * np.minimum(t, t_jam)

    channels = np.stack([fx, fy, fz, tx, ty, tz, dz, rz])
    channels += noise * _CHANNEL_NOISE_SCALE[:, None] * rng.standard_normal(
        (len(DEFAULT_CHANNEL_NAMES), T)
    )
    return channels


def simulate(config: SimulatorConfig) -> Dataset:
    """Generate a labelled synthetic dataset, deterministic per seed."""
    config.validate()
    rng = derive_rng(config.seed, TAG_SAMPLING)

    samples: list[ScrewingSample] = []
    for label, count in enumerate(config.counts):
        for i in range(int(count)):
            channels = _simulate_one(label, config, rng)
            samples.append(
                ScrewingSample(
                    channels=channels,
                    label=label,
                    sample_id=f"sim-{LABEL_NAMES[label]}-{i:04d}",
                )
            )

    corrupted_ids: list[str] = []
    if config.corrupt_count > 0:
        picked = rng.choice(
            len(samples), size=config.corrupt_count, replace=False
        )
        for index in sorted(int(i) for i in picked):
            victim = samples[index]
            channel = int(rng.integers(0, victim.num_channels))
            faulty = victim.channels.copy()
            faulty[channel] += _CORRUPTION_OFFSET * (1.0 + config.noise)
            samples[index] = ScrewingSample(
                channels=faulty, label=victim.label, sample_id=victim.sample_id
            )
            corrupted_ids.append(victim.sample_id)

    metadata = {
        "source": "simulated",
        "seed": int(config.seed),
        "counts": tuple(int(c) for c in config.counts),
        "corrupted_ids": tuple(corrupted_ids),
    }
    return Dataset(tuple(samples), DEFAULT_CHANNEL_NAMES, metadata)


# ---------------------------------------------------------------------------
# CSV ingestion and persistence
# ---------------------------------------------------------------------------


def _read_sample_csv(path: str) -> tuple[tuple[str, ...], np.ndarray]:
    """Parse one per-attempt CSV: header of channel names, then T data rows."""
    if not os.path.isfile(path):
        raise IngestionError("sample file not found", path=path)
    with open(path, "r", encoding="utf-8", newline="") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise IngestionError("empty sample file", path=path) from None
        names = tuple(cell.strip() for cell in header)
        if any(not name for name in names):
            raise IngestionError(
                "blank channel name in header", path=path, line=1
            )
        rows: list[list[float]] = []
        for line_no, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue  # tolerate blank lines
            if len(row) != len(names):
                raise IngestionError(
                    f"ragged row: expected {len(names)} values, got {len(row)}",
                    path=path,
                    line=line_no,
                )
            values: list[float] = []
            for name, cell in zip(names, row):
                try:
                    value = float(cell)
                except ValueError:
                    raise IngestionError(
                        f"non-numeric value {cell.strip()!r} in channel "
                        f"'{name}'",
                        path=path,
                        line=line_no,
                    ) from None
                if not math.isfinite(value):
                    raise IngestionError(
                        f"non-finite value {cell.strip()!r} in channel "
                        f"'{name}'",
                        path=path,
                        line=line_no,
                    )
                values.append(value)
            rows.append(values)
    if not rows:
        raise IngestionError("sample file has no data rows", path=path)
    return names, np.array(rows, dtype=np.float64).T


def ingest_csv(manifest_path: str) -> Dataset:
    """Load a dataset from a manifest CSV mapping sample files to labels.

    The manifest has columns ``path,label``; each referenced file holds one
    recording as a channel-name header followed by one row per time step.
    Paths are resolved relative to the manifest's directory.
    """
    if not os.path.isfile(manifest_path):
        raise IngestionError("manifest not found", path=manifest_path)
    base_dir = os.path.dirname(os.path.abspath(manifest_path))

    entries: list[tuple[str, int, str]] = []
    with open(manifest_path, "r", encoding="utf-8", newline="") as handle:
        reader = csv.reader(handle)
        try:
            header = [cell.strip() for cell in next(reader)]
        except StopIteration:
            raise IngestionError("empty manifest", path=manifest_path) from None
        if header not in (["path", "label"], ["path", "label", "provenance"]):
            raise IngestionError(
                f"manifest header must be 'path,label' or "
                f"'path,label,provenance', got {','.join(header)!r}",
                path=manifest_path,
                line=1,
            )
        has_provenance = len(header) == 3
        for line_no, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != len(header):
                raise IngestionError(
                    f"manifest row has {len(row)} column(s), expected "
                    f"{len(header)}",
                    path=manifest_path,
                    line=line_no,
                )
            rel_path, label_str = row[0].strip(), row[1].strip()
            if label_str not in LABEL_TO_INDEX:
                raise IngestionError(
                    f"unknown label {label_str!r}; expected one of "
                    f"{', '.join(LABEL_NAMES)}",
                    path=manifest_path,
                    line=line_no,
                )
            provenance = row[2].strip() if has_provenance else "original"
            if provenance not in _PROVENANCES:
                raise IngestionError(
                    f"unknown provenance {provenance!r}; expected one of "
                    f"{', '.join(_PROVENANCES)}",
                    path=manifest_path,
                    line=line_no,
                )
            entries.append((rel_path, LABEL_TO_INDEX[label_str], provenance))

    if not entries:
        raise IngestionError("manifest lists no samples", path=manifest_path)

    samples: list[ScrewingSample] = []
    reference_names: tuple[str, ...] | None = None
    for rel_path, label, provenance in entries:
        full_path = os.path.join(base_dir, rel_path)
        names, channels = _read_sample_csv(full_path)
        if reference_names is None:
            reference_names = names
        elif names != reference_names:
            raise IngestionError(
                f"channel header {names} does not match the first file's "
                f"{reference_names}",
                path=full_path,
                line=1,
            )
        sample_id = os.path.splitext(os.path.basename(rel_path))[0]
        samples.append(ScrewingSample(channels, label, sample_id, provenance))

    assert reference_names is not None
    try:
        return Dataset(
            tuple(samples),
            reference_names,
            {"source": "ingested", "manifest": os.path.abspath(manifest_path)},
        )
    except ConfigurationError as exc:
        raise IngestionError(str(exc), path=manifest_path) from exc


def save_dataset(ds: Dataset, directory: str) -> str:
    """Write a dataset as per-sample CSVs plus a manifest; returns its path.

    The layout round-trips through :func:`ingest_csv` bit-exactly (floats
    are written with ``repr`` precision).
    """
    os.makedirs(directory, exist_ok=True)
    samples_dir = os.path.join(directory, "samples")
    os.makedirs(samples_dir, exist_ok=True)

    manifest_path = os.path.join(directory, "manifest.csv")
    augmented = any(s.provenance != "original" for s in ds)
    with open(manifest_path, "w", encoding="utf-8", newline="") as manifest:
        writer = csv.writer(manifest)
        writer.writerow(
            ["path", "label", "provenance"] if augmented else ["path", "label"]
        )
        for sample in ds:
            rel_path = os.path.join("samples", f"{sample.sample_id}.csv")
            row = [rel_path, sample.label_name]
            if augmented:
                row.append(sample.provenance)
            writer.writerow(row)
            with open(
                os.path.join(directory, rel_path),
                "w",
                encoding="utf-8",
                newline="",
            ) as handle:
                sample_writer = csv.writer(handle)
                sample_writer.writerow(ds.channel_names)
                for row in sample.channels.T:
                    sample_writer.writerow([repr(float(v)) for v in row])
    return manifest_path


# ---------------------------------------------------------------------------
# Stratified splitting
# ---------------------------------------------------------------------------


def _largest_remainder_counts(
    class_sizes: np.ndarray, fraction: float
) -> np.ndarray:
    """Apportion round(N*fraction) across classes by largest remainder."""
    ideals = class_sizes * fraction
    base = np.floor(ideals).astype(np.int64)
    total = int(round(class_sizes.sum() * fraction))
    remainders = ideals - base
    # Never allocate a class's entire population to the selection.
    caps = np.maximum(class_sizes - 1, 0)
    base = np.minimum(base, caps)
    order = sorted(
        range(len(class_sizes)), key=lambda c: (-remainders[c], c)
    )
    shortfall = total - int(base.sum())
    while shortfall > 0:
        progressed = False
        for c in order:
            if shortfall == 0:
                break
            if base[c] < caps[c]:
                base[c] += 1
                shortfall -= 1
                progressed = True
        if not progressed:
            break
    return base


def stratified_split(
    ds: Dataset, test_fraction: float, seed: int
) -> tuple[Dataset, Dataset]:
    """Split into train/test preserving class proportions within ±1 sample."""
    if not 0.0 < test_fraction < 1.0:
        raise ConfigurationError(
            f"test_fraction must lie in (0, 1), got {test_fraction}"
        )
    class_sizes = ds.class_counts()
    for label, size in enumerate(class_sizes):
        if size < 2:
            raise ConfigurationError(
                f"class '{LABEL_NAMES[label]}' has {size} sample(s); "
                f"stratified splitting needs at least 2 per class"
            )

    test_counts = _largest_remainder_counts(class_sizes, test_fraction)
    rng = derive_rng(seed, TAG_SPLIT)

    test_indices: list[int] = []
    for label in range(NUM_CLASSES):
        pool = ds.class_indices(label)
        picked = rng.permutation(pool)[: test_counts[label]]
        test_indices.extend(int(i) for i in picked)

    test_set = set(test_indices)
    train_indices = [i for i in range(len(ds)) if i not in test_set]
    train = ds.subset(sorted(train_indices), split="train")
    test = ds.subset(sorted(test_indices), split="test")
    return train, test


def stratified_kfold(
    ds: Dataset, k: int, seed: int
) -> list[tuple[np.ndarray, np.ndarray]]:
    """Partition indices into k stratified folds; returns (train, val) pairs.

    Each class is dealt round-robin across folds; the leftover samples of
    each class go to the currently smallest folds, keeping overall fold
    sizes within one of each other.
    """
    if k < 2:
        raise ConfigurationError(f"k must be >= 2, got {k}")
    class_sizes = ds.class_counts()
    for label, size in enumerate(class_sizes):
        if 0 < size < k:
            raise ConfigurationError(
                f"class '{LABEL_NAMES[label]}' has only {size} sample(s); "
                f"cannot build {k} folds"
            )
    if len(ds) < k:
        raise ConfigurationError(
            f"dataset of {len(ds)} samples cannot fill {k} folds"
        )

    rng = derive_rng(seed, TAG_FOLDS)
    fold_members: list[list[int]] = [[] for _ in range(k)]
    fold_loads = np.zeros(k, dtype=np.int64)

    for label in range(NUM_CLASSES):
        pool = rng.permutation(ds.class_indices(label))
        base, extra = divmod(len(pool), k)
        cursor = 0
        for fold in range(k):
            fold_members[fold].extend(int(i) for i in pool[cursor:cursor + base])
            cursor += base
        fold_loads += base
        if extra:
            # Give leftovers to the least-loaded folds (ties -> lowest index).
            order = sorted(range(k), key=lambda f: (fold_loads[f], f))
            for fold in order[:extra]:
                fold_members[fold].append(int(pool[cursor]))
                cursor += 1
                fold_loads[fold] += 1

    pairs: list[tuple[np.ndarray, np.ndarray]] = []
    all_indices = set(range(len(ds)))
    for fold in range(k):
        val = np.array(sorted(fold_members[fold]), dtype=np.int64)
        train = np.array(sorted(all_indices - set(fold_members[fold])), dtype=np.int64)
        pairs.append((train, val))
    return pairs
