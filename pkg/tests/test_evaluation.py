"""Confusion counting, task metrics, and the paired t-test."""

import math

import numpy as np
import pytest

from screwfdi.errors import ConfigurationError, DegenerateInputError
from screwfdi.evaluation import (
    ConfusionMatrix,
    MetricReport,
    confusion,
    metrics,
    objective,
    paired_ttest,
    regularized_incomplete_beta,
    student_t_two_tailed_p,
)

# Reference values computed once with an independent statistical library
# and frozen here; the implementation must agree to 1e-6.
FROZEN_TTEST_EXAMPLE = {
    "a": [1, 1, 1, 1, 1, 1, 1, 1, 1, 2],
    "b": [0] * 10,
    "t": 11.0,
    "p": 1.6099324793935698e-06,
}


class TestConfusion:
    def test_perfect_predictions_diagonal(self):
        y = np.array([0, 1, 2, 2, 1, 0, 0])
        cm = confusion(y, y)
        assert np.array_equal(
            cm.counts, np.diag([3, 2, 2])
        )

    def test_hand_count(self):
        cm = confusion([0, 0, 2], [0, 2, 0])
        assert cm.counts[0, 0] == 1
        assert cm.counts[0, 2] == 1
        assert cm.counts[2, 0] == 1
        assert cm.total == 3

    def test_row_sums_match_true_counts(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            n = int(rng.integers(1, 60))
            t = rng.integers(0, 3, size=n)
            p = rng.integers(0, 3, size=n)
            cm = confusion(t, p)
            for label in range(3):
                assert cm.counts[label].sum() == (t == label).sum()
                assert cm.counts[:, label].sum() == (p == label).sum()

    def test_tp_fp_fn_tn_consistency(self):
        rng = np.random.default_rng(1)
        t = rng.integers(0, 3, size=50)
        p = rng.integers(0, 3, size=50)
        cm = confusion(t, p)
        for label in range(3):
            assert cm.true_positives(label) + cm.false_negatives(label) == cm.counts[label].sum()
            assert cm.true_positives(label) + cm.false_positives(label) == cm.counts[:, label].sum()
            assert (
                cm.true_positives(label)
                + cm.false_positives(label)
                + cm.false_negatives(label)
                + cm.true_negatives(label)
            ) == cm.total

    def test_validation(self):
        with pytest.raises(ConfigurationError):
            confusion([0, 1], [0])
        with pytest.raises(ConfigurationError):
            confusion([0, 3], [0, 1])
        with pytest.raises(ConfigurationError):
            confusion([0, -1], [0, 1])
        with pytest.raises(ConfigurationError):
            confusion([0.5, 1.0], [0, 1])
        with pytest.raises(ConfigurationError):
            ConfusionMatrix(np.array([[1, 2], [3, 4]]))


class TestMetrics:
    def test_diagonal_is_perfect(self):
        report = metrics(ConfusionMatrix(np.diag([4, 3, 2])))
        assert report.accuracy == 1.0
        assert report.precision == (1.0, 1.0, 1.0)
        assert report.recall == (1.0, 1.0, 1.0)

    def test_always_mounted_predictor_has_null_jammed_recall(self):
        true = np.array([0] * 61 + [1] * 23 + [2] * 12)
        pred = np.zeros_like(true)
        report = metrics(confusion(true, pred))
        assert report.jammed_recall == 0.0
        assert report.mounted_precision == pytest.approx(61 / 96)
        assert report.accuracy == pytest.approx(61 / 96)
        # Classes never predicted have undefined precision, not 0 or NaN.
        assert report.precision[1] is None
        assert report.precision[2] is None

    def test_hand_matrix(self):
        cm = ConfusionMatrix(
            np.array([[5, 1, 0], [2, 3, 0], [1, 0, 4]])
        )
        report = metrics(cm)
        assert report.precision[0] == pytest.approx(5 / 8)
        assert report.recall[2] == pytest.approx(4 / 5)
        assert report.precision[1] == pytest.approx(3 / 4)
        assert report.recall[0] == pytest.approx(5 / 6)
        assert report.accuracy == pytest.approx(12 / 16)

    def test_self_confusion_accuracy_one(self):
        rng = np.random.default_rng(2)
        for _ in range(50):
            y = rng.integers(0, 3, size=int(rng.integers(1, 40)))
            assert metrics(confusion(y, y)).accuracy == 1.0

    def test_permutation_invariance(self):
        rng = np.random.default_rng(3)
        counts = rng.integers(0, 20, size=(3, 3))
        base = metrics(ConfusionMatrix(counts))
        perm = [2, 0, 1]
        permuted_counts = np.zeros((3, 3), dtype=np.int64)
        for i in range(3):
            for j in range(3):
                permuted_counts[perm[i], perm[j]] = counts[i, j]
        permuted = metrics(ConfusionMatrix(permuted_counts))
        for i in range(3):
            assert permuted.precision[perm[i]] == base.precision[i]
            assert permuted.recall[perm[i]] == base.recall[i]
        assert permuted.accuracy == base.accuracy

    def test_brute_force_recount(self):
        rng = np.random.default_rng(4)
        for _ in range(200):
            n = int(rng.integers(1, 50))
            t = rng.integers(0, 3, size=n)
            p = rng.integers(0, 3, size=n)
            report = metrics(confusion(t, p))
            assert report.accuracy == pytest.approx(float(np.mean(t == p)))
            for label in range(3):
                predicted = int((p == label).sum())
                actual = int((t == label).sum())
                hits = int(((t == label) & (p == label)).sum())
                expected_precision = (
                    hits / predicted if predicted else None
                )
                expected_recall = hits / actual if actual else None
                assert report.precision[label] == expected_precision
                assert report.recall[label] == expected_recall

    def test_empty_matrix_rejected(self):
        with pytest.raises(DegenerateInputError):
            metrics(ConfusionMatrix(np.zeros((3, 3), dtype=int)))


def _report(mounted_precision):
    return MetricReport(
        accuracy=0.5,
        precision=(mounted_precision, 0.5, 0.5),
        recall=(0.5, 0.5, 0.5),
    )


class TestObjective:
    def test_mean(self):
        assert objective([_report(1.0), _report(0.8)]) == pytest.approx(0.9)

    def test_undefined_counts_as_zero(self):
        assert objective([_report(None), _report(0.8)]) == pytest.approx(0.4)

    def test_identical_folds(self):
        assert objective([_report(0.7)] * 10) == pytest.approx(0.7)

    def test_empty_rejected(self):
        with pytest.raises(ConfigurationError):
            objective([])


class TestIncompleteBeta:
    def test_uniform_case_is_identity(self):
        for x in (0.0, 0.1, 0.37, 0.5, 0.93, 1.0):
            assert regularized_incomplete_beta(x, 1.0, 1.0) == pytest.approx(
                x, abs=1e-12
            )

    def test_reflection_identity(self):
        rng = np.random.default_rng(5)
        for _ in range(100):
            x = float(rng.uniform(0.001, 0.999))
            a = float(rng.uniform(0.2, 8.0))
            b = float(rng.uniform(0.2, 8.0))
            total = regularized_incomplete_beta(
                x, a, b
            ) + regularized_incomplete_beta(1.0 - x, b, a)
            assert total == pytest.approx(1.0, abs=1e-10)

    def test_domain_validation(self):
        with pytest.raises(ConfigurationError):
            regularized_incomplete_beta(-0.1, 1, 1)
        with pytest.raises(ConfigurationError):
            regularized_incomplete_beta(0.5, 0, 1)

    def test_cauchy_special_case(self):
        # One degree of freedom is the Cauchy distribution, with the exact
        # two-tailed tail mass 1 - 2*atan(|t|)/pi.
        for t in (0.5, 1.0, 2.0, 7.0):
            expected = 1.0 - 2.0 * math.atan(t) / math.pi
            assert student_t_two_tailed_p(t, 1) == pytest.approx(
                expected, abs=1e-10
            )

    def test_two_dof_closed_form(self):
        for t in (0.3, 1.0, math.sqrt(2), 4.0):
            expected = 1.0 - t / math.sqrt(t * t + 2.0)
            assert student_t_two_tailed_p(t, 2) == pytest.approx(
                expected, abs=1e-10
            )


class TestPairedTTest:
    def test_zero_variance_rejected(self):
        a = [0.8, 0.9, 0.7, 0.8]
        with pytest.raises(DegenerateInputError):
            paired_ttest(a, a)
        with pytest.raises(DegenerateInputError):
            paired_ttest([1.0, 2.0, 3.0], [0.5, 1.5, 2.5])

    def test_symmetric_differences(self):
        a = np.zeros(10)
        b = np.array([-1.0, 1.0] * 5)
        result = paired_ttest(a, b)
        assert result.t == 0.0
        assert result.p_value == 1.0
        assert result.degrees_of_freedom == 9

    def test_frozen_oracle(self):
        result = paired_ttest(
            FROZEN_TTEST_EXAMPLE["a"], FROZEN_TTEST_EXAMPLE["b"]
        )
        assert result.t == pytest.approx(FROZEN_TTEST_EXAMPLE["t"], abs=1e-9)
        assert result.p_value == pytest.approx(
            FROZEN_TTEST_EXAMPLE["p"], abs=1e-6
        )
        assert result.mean_difference == pytest.approx(1.1)

    def test_antisymmetry_exact(self):
        rng = np.random.default_rng(6)
        a = rng.uniform(0.5, 1.0, size=10)
        b = rng.uniform(0.5, 1.0, size=10)
        fwd = paired_ttest(a, b)
        rev = paired_ttest(b, a)
        assert rev.t == -fwd.t
        assert rev.p_value == fwd.p_value
        assert rev.mean_difference == -fwd.mean_difference

    def test_p_in_unit_interval_and_monotone(self):
        base = np.zeros(10)
        rng = np.random.default_rng(7)
        noise = rng.standard_normal(10) * 0.3
        noise -= noise.mean()  # so the shift alone controls |t|
        previous_p = 1.0000001
        for shift in (0.0, 0.05, 0.1, 0.3, 0.8, 2.0):
            result = paired_ttest(noise + shift, base)
            assert 0.0 < result.p_value <= 1.0
            assert result.p_value < previous_p or (
                shift == 0.0 and result.p_value == 1.0
            )
            previous_p = result.p_value

    def test_validation(self):
        with pytest.raises(ConfigurationError):
            paired_ttest([1.0], [0.5])
        with pytest.raises(ConfigurationError):
            paired_ttest([1.0, 2.0], [0.5])
        with pytest.raises(ConfigurationError):
            paired_ttest([1.0, np.nan], [0.5, 0.5])
