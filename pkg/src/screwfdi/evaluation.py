"""Task metrics and paired statistical comparison.

The monitoring task has two asymmetric goals: when the system reports a
correct assembly it must be right (precision of the ``mounted`` class), and
jams must not slip through (recall of the ``jammed`` class).  The
:class:`MetricReport` carries both alongside the standard per-class
precision/recall and accuracy; F1 is deliberately not provided because it
blends the two goals into a single number with the wrong trade-off for this
task.

Model comparison uses a paired t-test over per-fold scores.  The
t-distribution tail is evaluated with an internal regularized
incomplete-beta routine so the package needs no statistics dependency.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .datasets import NUM_CLASSES
from .errors import ConfigurationError, DegenerateInputError

__all__ = [
    "ConfusionMatrix",
    "MetricReport",
    "PairedTTestResult",
    "confusion",
    "metrics",
    "objective",
    "paired_ttest",
    "regularized_incomplete_beta",
    "student_t_two_tailed_p",
]


@dataclass(frozen=True)
class ConfusionMatrix:
    """3x3 count matrix; rows are true classes, columns predictions."""

    counts: np.ndarray

    def __post_init__(self) -> None:
        arr = np.array(self.counts, dtype=np.int64)
        if arr.shape != (NUM_CLASSES, NUM_CLASSES):
            raise ConfigurationError(
                f"confusion matrix must be {NUM_CLASSES}x{NUM_CLASSES}, "
                f"got shape {arr.shape}"
            )
        if (arr < 0).any():
            raise ConfigurationError("confusion counts must be non-negative")
        arr.flags.writeable = False
        object.__setattr__(self, "counts", arr)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def true_positives(self, label: int) -> int:
        return int(self.counts[label, label])

    def false_positives(self, label: int) -> int:
        return int(self.counts[:, label].sum() - self.counts[label, label])

    def false_negatives(self, label: int) -> int:
        return int(self.counts[label, :].sum() - self.counts[label, label])

    def true_negatives(self, label: int) -> int:
        return (
            self.total
            - self.true_positives(label)
            - self.false_positives(label)
            - self.false_negatives(label)
        )


@dataclass(frozen=True)
class MetricReport:
    """Accuracy plus per-class precision/recall; ``None`` marks undefined.

    A precision is undefined when the class was never predicted, a recall
    when the class never occurred; both are reported as ``None`` instead of
    an arbitrary 0 or 1.
    """

    accuracy: float
    precision: tuple
    recall: tuple

    @property
    def mounted_precision(self):
        return self.precision[0]

    @property
    def jammed_recall(self):
        return self.recall[2]

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "precision": list(self.precision),
            "recall": list(self.recall),
            "mounted_precision": self.mounted_precision,
            "jammed_recall": self.jammed_recall,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "MetricReport":
        return cls(
            accuracy=payload["accuracy"],
            precision=tuple(payload["precision"]),
            recall=tuple(payload["recall"]),
        )


@dataclass(frozen=True)
class PairedTTestResult:
    """Two-tailed paired t-test outcome."""

    t: float
    degrees_of_freedom: int
    p_value: float
    mean_difference: float

    def to_dict(self) -> dict:
        return {
            "t": self.t,
            "degrees_of_freedom": self.degrees_of_freedom,
            "p_value": self.p_value,
            "mean_difference": self.mean_difference,
        }


def confusion(true_labels, predicted_labels) -> ConfusionMatrix:
    """Count (true, predicted) label pairs into a 3x3 matrix."""
    true_arr = np.asarray(true_labels)
    pred_arr = np.asarray(predicted_labels)
    if true_arr.shape != pred_arr.shape or true_arr.ndim != 1:
        raise ConfigurationError(
            f"label lists must be equal-length 1-D, got shapes "
            f"{true_arr.shape} and {pred_arr.shape}"
        )
    for name, arr in (("true", true_arr), ("predicted", pred_arr)):
        if arr.size and (
            not np.issubdtype(arr.dtype, np.integer)
            or arr.min() < 0
            or arr.max() >= NUM_CLASSES
        ):
            raise ConfigurationError(
                f"{name} labels must be integers in [0, {NUM_CLASSES - 1}]"
            )
    flat = np.bincount(
        true_arr.astype(np.int64) * NUM_CLASSES + pred_arr.astype(np.int64),
        minlength=NUM_CLASSES * NUM_CLASSES,
    )
    return ConfusionMatrix(flat.reshape(NUM_CLASSES, NUM_CLASSES))


def metrics(cm: ConfusionMatrix) -> MetricReport:
    """Accuracy and per-class precision/recall from a confusion matrix."""
    total = cm.total
    if total == 0:
        raise DegenerateInputError("cannot compute metrics of zero samples")
    accuracy = float(np.trace(cm.counts)) / total
    precision = []
    recall = []
    for label in range(NUM_CLASSES):
        predicted = cm.counts[:, label].sum()
        actual = cm.counts[label, :].sum()
        tp = cm.counts[label, label]
        precision.append(float(tp) / predicted if predicted > 0 else None)
        recall.append(float(tp) / actual if actual > 0 else None)
    return MetricReport(accuracy, tuple(precision), tuple(recall))


def objective(fold_reports: Iterable[MetricReport]) -> float:
    """Mean mounted-class precision across folds; undefined folds count 0.

    A model that never predicts ``mounted`` is useless for the accept-part
    goal, so its fold contributes zero rather than being skipped.
    """
    reports = list(fold_reports)
    if not reports:
        raise ConfigurationError("objective needs at least one fold report")
    values = [
        r.mounted_precision if r.mounted_precision is not None else 0.0
        for r in reports
    ]
    return float(np.mean(values))


# ---------------------------------------------------------------------------
# Student's t distribution via the regularized incomplete beta function
# ---------------------------------------------------------------------------

_BETA_EPS = 1e-14
_BETA_TINY = 1e-300
_BETA_MAX_ITER = 300


def _beta_continued_fraction(x: float, a: float, b: float) -> float:
    """Continued fraction for the incomplete beta (modified Lentz)."""
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _BETA_TINY:
        d = _BETA_TINY
    d = 1.0 / d
    h = d
    for m in range(1, _BETA_MAX_ITER + 1):
        m2 = 2 * m
        # Even step.
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _BETA_TINY:
            d = _BETA_TINY
        c = 1.0 + aa / c
        if abs(c) < _BETA_TINY:
            c = _BETA_TINY
        d = 1.0 / d
        h *= d * c
        # Odd step.
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _BETA_TINY:
            d = _BETA_TINY
        c = 1.0 + aa / c
        if abs(c) < _BETA_TINY:
            c = _BETA_TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _BETA_EPS:
            return h
    raise ArithmeticError(
        f"incomplete beta continued fraction did not converge for "
        f"x={x}, a={a}, b={b}"
    )


def regularized_incomplete_beta(x: float, a: float, b: float) -> float:
    """I_x(a, b) for a, b > 0 and x in [0, 1]."""
    if not 0.0 <= x <= 1.0:
        raise ConfigurationError(f"x must lie in [0, 1], got {x}")
    if a <= 0 or b <= 0:
        raise ConfigurationError(f"a and b must be positive, got {a}, {b}")
    if x == 0.0:
        return 0.0
    if x == 1.0:
        return 1.0
    log_front = (
        math.lgamma(a + b)
        - math.lgamma(a)
        - math.lgamma(b)
        + a * math.log(x)
        + b * math.log1p(-x)
    )
    front = math.exp(log_front)
    # Use the expansion on the side where the continued fraction converges
    # quickly, mirroring for the other half.
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _beta_continued_fraction(x, a, b) / a
    return 1.0 - front * _beta_continued_fraction(1.0 - x, b, a) / b


def student_t_two_tailed_p(t: float, degrees_of_freedom: int) -> float:
    """P(|T| >= |t|) for Student's t with the given degrees of freedom."""
    if degrees_of_freedom < 1:
        raise ConfigurationError(
            f"degrees of freedom must be >= 1, got {degrees_of_freedom}"
        )
    nu = float(degrees_of_freedom)
    x = nu / (nu + t * t)
    return regularized_incomplete_beta(x, nu / 2.0, 0.5)


def paired_ttest(a: Sequence[float], b: Sequence[float]) -> PairedTTestResult:
    """Two-tailed paired t-test of paired score vectors ``a`` and ``b``."""
    a_arr = np.asarray(a, dtype=np.float64)
    b_arr = np.asarray(b, dtype=np.float64)
    if a_arr.shape != b_arr.shape or a_arr.ndim != 1:
        raise ConfigurationError(
            f"paired vectors must be equal-length 1-D, got shapes "
            f"{a_arr.shape} and {b_arr.shape}"
        )
    n = a_arr.size
    if n < 2:
        raise ConfigurationError(f"paired t-test needs n >= 2, got n={n}")
    if not (np.isfinite(a_arr).all() and np.isfinite(b_arr).all()):
        raise ConfigurationError("paired t-test inputs must be finite")
    diff = a_arr - b_arr
    sd = float(diff.std(ddof=1))
    if sd == 0.0:
        raise DegenerateInputError(
            "paired differences have zero variance; the t statistic is "
            "undefined"
        )
    mean_diff = float(diff.mean())
    t = mean_diff / (sd / math.sqrt(n))
    p = student_t_two_tailed_p(t, n - 1)
    return PairedTTestResult(t, n - 1, p, mean_diff)
