"""Dataset model, simulator, CSV ingestion, and stratified splitting."""

import collections

import numpy as np
import pytest

from screwfdi.datasets import (
    DEFAULT_CHANNEL_NAMES,
    JAMMED,
    LABEL_NAMES,
    MOUNTED,
    NOT_MOUNTED,
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
from screwfdi.errors import (
    ConfigurationError,
    DegenerateInputError,
    IngestionError,
)


def _sample(sample_id="s0", label=0, C=6, T=10, fill=1.0):
    return ScrewingSample(np.full((C, T), fill), label, sample_id)


def _toy_dataset(per_class, C=6, T=10):
    samples = []
    for label, count in enumerate(per_class):
        for i in range(count):
            samples.append(
                _sample(f"{LABEL_NAMES[label]}-{i}", label, C, T, fill=label + i)
            )
    names = DEFAULT_CHANNEL_NAMES[:C]
    return Dataset(tuple(samples), names)


class TestContainers:
    def test_sample_validation(self):
        with pytest.raises(ConfigurationError):
            ScrewingSample(np.zeros((6,)), 0, "flat")  # not 2-D
        with pytest.raises(ConfigurationError):
            ScrewingSample(np.zeros((6, 0)), 0, "empty")
        with pytest.raises(ConfigurationError):
            ScrewingSample(np.full((6, 4), np.nan), 0, "nan")
        with pytest.raises(ConfigurationError):
            ScrewingSample(np.zeros((6, 4)), 5, "badlabel")

    def test_sample_is_immutable(self):
        s = _sample()
        with pytest.raises(ValueError):
            s.channels[0, 0] = 9.0

    def test_dataset_rejects_duplicate_ids(self):
        with pytest.raises(ConfigurationError, match="duplicate"):
            Dataset((_sample("a"), _sample("a")), DEFAULT_CHANNEL_NAMES[:6])

    def test_dataset_rejects_channel_mismatch(self):
        with pytest.raises(ConfigurationError):
            Dataset((_sample("a", C=8),), DEFAULT_CHANNEL_NAMES[:6])

    def test_dataset_rejects_odd_channel_count(self):
        with pytest.raises(ConfigurationError):
            Dataset((_sample("a", C=5),), DEFAULT_CHANNEL_NAMES[:5])

    def test_class_counts(self):
        ds = _toy_dataset([3, 2, 2])
        assert ds.class_counts().tolist() == [3, 2, 2]
        assert len(ds) == 7

    def test_as_arrays(self):
        ds = _toy_dataset([2, 2, 2], C=6, T=12)
        X, y = as_arrays(ds)
        assert X.shape == (6, 6, 12)
        assert y.tolist() == [0, 0, 1, 1, 2, 2]

    def test_as_arrays_rejects_ragged(self):
        a = _sample("a", T=10)
        b = _sample("b", T=11)
        ds = Dataset((a, b), DEFAULT_CHANNEL_NAMES[:6])
        with pytest.raises(DegenerateInputError, match="differing lengths"):
            as_arrays(ds)


class TestSimulator:
    def test_determinism(self):
        cfg = SimulatorConfig(counts=(10, 5, 3), seed=7)
        first = simulate(cfg)
        second = simulate(cfg)
        assert first.sample_ids == second.sample_ids
        assert first.metadata == second.metadata
        for a, b in zip(first, second):
            assert a.label == b.label
            assert np.array_equal(a.channels, b.channels)

    def test_other_seed_differs(self):
        a = simulate(SimulatorConfig(counts=(4, 4, 4), seed=1))
        b = simulate(SimulatorConfig(counts=(4, 4, 4), seed=2))
        assert not np.array_equal(a[0].channels, b[0].channels)

    def test_zero_noise_collapses_within_class(self):
        ds = simulate(SimulatorConfig(counts=(4, 4, 4), noise=0.0, seed=3))
        for label in (MOUNTED, NOT_MOUNTED, JAMMED):
            members = [s.channels for s in ds if s.label == label]
            for other in members[1:]:
                assert np.array_equal(members[0], other)

    def test_paper_scale_imbalance_ratios(self):
        ds = simulate(SimulatorConfig(counts=(306, 112, 61), length=16, seed=0))
        counts = ds.class_counts()
        assert counts.tolist() == [306, 112, 61]
        percentages = [round(100.0 * c / len(ds), 1) for c in counts]
        assert percentages == [63.9, 23.4, 12.7]

    def test_signature_separability(self):
        # With zero noise the mounted tightening torque must dominate the
        # not-mounted plateau over the final quarter of the series.
        ds = simulate(SimulatorConfig(counts=(1, 1, 1), noise=0.0, seed=5))
        tz = DEFAULT_CHANNEL_NAMES.index("Tz")
        mounted = [s for s in ds if s.label == MOUNTED][0]
        loose = [s for s in ds if s.label == NOT_MOUNTED][0]
        quarter = mounted.length // 4
        assert (
            mounted.channels[tz, -quarter:].mean()
            > loose.channels[tz, -quarter:].mean()
        )

    def test_length_jitter(self):
        cfg = SimulatorConfig(
            counts=(8, 8, 8), length=64, length_jitter=16, seed=11
        )
        lengths = {s.length for s in simulate(cfg)}
        assert len(lengths) > 1
        assert all(48 <= t <= 64 for t in lengths)

    def test_corruption_marks_ids(self):
        cfg = SimulatorConfig(counts=(10, 6, 4), corrupt_count=3, seed=9)
        ds = simulate(cfg)
        corrupted = ds.metadata["corrupted_ids"]
        assert len(corrupted) == 3
        assert len(set(corrupted)) == 3
        assert all(cid in ds.sample_ids for cid in corrupted)

    def test_config_validation(self):
        with pytest.raises(ConfigurationError):
            SimulatorConfig(counts=(-1, 2, 2)).validate()
        with pytest.raises(ConfigurationError):
            SimulatorConfig(counts=(2, 2, 2), length=7).validate()
        with pytest.raises(ConfigurationError):
            SimulatorConfig(counts=(2, 2, 2), noise=-0.5).validate()
        with pytest.raises(ConfigurationError):
            SimulatorConfig(counts=(2, 2, 2), corrupt_count=99).validate()


class TestIngestion:
    @staticmethod
    def _write_sample(path, rows, header="Fx,Fy,Fz,Tx,Ty,Tz"):
        with open(path, "w", encoding="utf-8") as handle:
            handle.write(header + "\n")
            for row in rows:
                handle.write(",".join(str(v) for v in row) + "\n")

    @staticmethod
    def _write_manifest(path, entries):
        with open(path, "w", encoding="utf-8") as handle:
            handle.write("path,label\n")
            for rel, label in entries:
                handle.write(f"{rel},{label}\n")

    def test_three_file_manifest(self, tmp_path):
        rows = [[0.1 * i, 1, 2, 3, 4, 5] for i in range(4)]
        for name in ("a", "b", "c"):
            self._write_sample(tmp_path / f"{name}.csv", rows)
        manifest = tmp_path / "manifest.csv"
        self._write_manifest(
            manifest,
            [("a.csv", "mounted"), ("b.csv", "not_mounted"), ("c.csv", "jammed")],
        )
        ds = ingest_csv(str(manifest))
        assert len(ds) == 3
        assert ds.labels.tolist() == [0, 1, 2]
        assert ds.channel_names == ("Fx", "Fy", "Fz", "Tx", "Ty", "Tz")
        assert ds[0].sample_id == "a"
        assert ds[0].channels.shape == (6, 4)
        assert ds[0].channels[0, 1] == pytest.approx(0.1)

    def test_nan_cell_names_location(self, tmp_path):
        self._write_sample(
            tmp_path / "bad.csv", [[1, 2, 3, 4, 5, 6], [1, "nan", 3, 4, 5, 6]]
        )
        self._write_manifest(tmp_path / "m.csv", [("bad.csv", "mounted")])
        with pytest.raises(IngestionError) as excinfo:
            ingest_csv(str(tmp_path / "m.csv"))
        assert "Fy" in str(excinfo.value)
        assert excinfo.value.line == 3
        assert excinfo.value.path.endswith("bad.csv")

    def test_ragged_row(self, tmp_path):
        self._write_sample(tmp_path / "r.csv", [[1, 2, 3, 4, 5, 6], [1, 2, 3]])
        self._write_manifest(tmp_path / "m.csv", [("r.csv", "jammed")])
        with pytest.raises(IngestionError, match="ragged"):
            ingest_csv(str(tmp_path / "m.csv"))

    def test_unknown_label(self, tmp_path):
        self._write_sample(tmp_path / "a.csv", [[1, 2, 3, 4, 5, 6]])
        self._write_manifest(tmp_path / "m.csv", [("a.csv", "exploded")])
        with pytest.raises(IngestionError) as excinfo:
            ingest_csv(str(tmp_path / "m.csv"))
        assert "exploded" in str(excinfo.value)
        assert excinfo.value.line == 2

    def test_missing_file(self, tmp_path):
        self._write_manifest(tmp_path / "m.csv", [("ghost.csv", "mounted")])
        with pytest.raises(IngestionError, match="not found"):
            ingest_csv(str(tmp_path / "m.csv"))

    def test_non_numeric_cell(self, tmp_path):
        self._write_sample(tmp_path / "t.csv", [[1, 2, "oops", 4, 5, 6]])
        self._write_manifest(tmp_path / "m.csv", [("t.csv", "mounted")])
        with pytest.raises(IngestionError, match="oops"):
            ingest_csv(str(tmp_path / "m.csv"))

    def test_header_mismatch_across_files(self, tmp_path):
        self._write_sample(tmp_path / "a.csv", [[1, 2, 3, 4, 5, 6]])
        self._write_sample(
            tmp_path / "b.csv",
            [[1, 2, 3, 4, 5, 6]],
            header="Fx,Fy,Fz,Mx,My,Mz",
        )
        self._write_manifest(
            tmp_path / "m.csv", [("a.csv", "mounted"), ("b.csv", "jammed")]
        )
        with pytest.raises(IngestionError, match="does not match"):
            ingest_csv(str(tmp_path / "m.csv"))

    def test_round_trip(self, tmp_path):
        original = simulate(
            SimulatorConfig(counts=(3, 2, 2), length=12, seed=21)
        )
        manifest = save_dataset(original, str(tmp_path / "out"))
        loaded = ingest_csv(manifest)
        assert loaded.sample_ids == original.sample_ids
        assert loaded.channel_names == original.channel_names
        assert loaded.labels.tolist() == original.labels.tolist()
        for a, b in zip(original, loaded):
            assert np.array_equal(a.channels, b.channels)


class TestStratifiedSplit:
    def test_paper_scale_split(self):
        ds = _toy_dataset([306, 112, 61], T=4)
        train, test = stratified_split(ds, 0.2, seed=0)
        assert len(test) == 96
        assert len(train) == 383
        # Per-class test counts stay within one sample of the ideal share.
        for label, size in enumerate([306, 112, 61]):
            got = int(test.class_counts()[label])
            assert abs(got - size * 0.2) <= 1

    def test_balanced_exact(self):
        ds = _toy_dataset([10, 10, 10])
        train, test = stratified_split(ds, 0.2, seed=1)
        assert test.class_counts().tolist() == [2, 2, 2]
        assert train.class_counts().tolist() == [8, 8, 8]

    def test_partition(self):
        ds = _toy_dataset([9, 7, 5])
        train, test = stratified_split(ds, 0.3, seed=2)
        combined = collections.Counter(train.sample_ids + test.sample_ids)
        assert combined == collections.Counter(ds.sample_ids)
        assert set(train.sample_ids).isdisjoint(test.sample_ids)

    def test_determinism_and_seed_sensitivity(self):
        ds = _toy_dataset([20, 12, 8])
        _, test_a = stratified_split(ds, 0.25, seed=5)
        _, test_b = stratified_split(ds, 0.25, seed=5)
        _, test_c = stratified_split(ds, 0.25, seed=6)
        assert test_a.sample_ids == test_b.sample_ids
        assert test_a.sample_ids != test_c.sample_ids

    def test_rejects_tiny_class(self):
        ds = _toy_dataset([5, 5, 1])
        with pytest.raises(ConfigurationError, match="jammed"):
            stratified_split(ds, 0.2, seed=0)

    def test_rejects_bad_fraction(self):
        ds = _toy_dataset([5, 5, 5])
        with pytest.raises(ConfigurationError):
            stratified_split(ds, 0.0, seed=0)
        with pytest.raises(ConfigurationError):
            stratified_split(ds, 1.0, seed=0)


class TestStratifiedKFold:
    def test_paper_scale_fold_sizes(self):
        ds = _toy_dataset([306, 112, 61], T=4)
        folds = stratified_kfold(ds, 10, seed=0)
        sizes = sorted(len(val) for _, val in folds)
        assert set(sizes) == {47, 48}
        assert sum(sizes) == 479

    def test_per_fold_class_balance(self):
        ds = _toy_dataset([306, 112, 61], T=4)
        labels = ds.labels
        for _, val in stratified_kfold(ds, 10, seed=3):
            for label, size in enumerate([306, 112, 61]):
                got = int((labels[val] == label).sum())
                assert abs(got - size / 10) <= 1

    def test_partition(self):
        ds = _toy_dataset([13, 9, 6])
        folds = stratified_kfold(ds, 3, seed=1)
        seen = np.concatenate([val for _, val in folds])
        assert sorted(seen.tolist()) == list(range(len(ds)))
        for train, val in folds:
            assert set(train.tolist()).isdisjoint(val.tolist())
            assert len(train) + len(val) == len(ds)

    def test_balanced_six(self):
        ds = _toy_dataset([2, 2, 2])
        folds = stratified_kfold(ds, 2, seed=0)
        labels = ds.labels
        for _, val in folds:
            assert sorted(labels[val].tolist()) == [0, 1, 2]

    def test_rejects_k_above_minority(self):
        ds = _toy_dataset([10, 10, 3])
        with pytest.raises(ConfigurationError, match="jammed"):
            stratified_kfold(ds, 4, seed=0)
        with pytest.raises(ConfigurationError):
            stratified_kfold(ds, 1, seed=0)

    def test_determinism(self):
        ds = _toy_dataset([12, 8, 6])
        a = stratified_kfold(ds, 4, seed=9)
        b = stratified_kfold(ds, 4, seed=9)
        for (ta, va), (tb, vb) in zip(a, b):
            assert np.array_equal(ta, tb)
            assert np.array_equal(va, vb)
