"""Report generation from persisted experiment records.

Every number in a report is recomputed from the line-delimited trial
records (and the experiment summary for test-set rows); regenerating a
report never trains anything. Tables are emitted both as aligned text and
as JSON; charts are standalone SVG files rendered without a display
server.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import IngestionError
from .pipeline import (
    PairwiseComparison,
    ResultView,
    TrialRecord,
    compare,
    fold_metric_values,
    select_best,
)

SUMMARY_FILENAME = "summary.json"
RECORDS_FILENAME = "records.jsonl"


@dataclass(frozen=True)
class ExperimentRecords:
    """One experiment's persisted summary and trial records."""

    summary: dict
    records: tuple

    @property
    def name(self) -> str:
        return self.summary["name"]

    @property
    def best(self) -> TrialRecord:
        return self.records[self.summary["best_trial_index"]]

    def view(self) -> ResultView:
        return ResultView.from_summary(self.summary)


def load_experiment(directory) -> ExperimentRecords:
    """Read summary.json and records.jsonl from one result directory."""
    directory = Path(directory)
    summary_path = directory / SUMMARY_FILENAME
    records_path = directory / RECORDS_FILENAME
    for path in (summary_path, records_path):
        if not path.is_file():
            raise IngestionError("missing report input", path=str(path))
    try:
        summary = json.loads(summary_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise IngestionError(
            f"corrupt summary: {exc}", path=str(summary_path)
        ) from exc
    records = []
    for lineno, line in enumerate(
        records_path.read_text(encoding="utf-8").splitlines(), start=1
    ):
        if not line.strip():
            continue
        try:
            records.append(TrialRecord.from_dict(json.loads(line)))
        except (json.JSONDecodeError, KeyError, ValueError) as exc:
            raise IngestionError(
                f"corrupt trial record: {exc}", path=str(records_path), line=lineno
            ) from exc
    if not records:
        raise IngestionError("no trial records", path=str(records_path))
    best_index = summary.get("best_trial_index")
    by_index = {r.trial_index: r for r in records}
    if best_index not in by_index:
        raise IngestionError(
            f"summary points at trial {best_index!r} which is not in the "
            "record file",
            path=str(summary_path),
        )
    if select_best(records).trial_index != best_index:
        raise IngestionError(
            "summary best trial disagrees with the trial records",
            path=str(summary_path),
        )
    ordered = tuple(sorted(records, key=lambda r: r.trial_index))
    return ExperimentRecords(summary=summary, records=ordered)


def _mean_sd(values) -> tuple:
    arr = np.asarray(values, dtype=np.float64)
    mean = float(arr.mean())
    sd = float(arr.std(ddof=1)) if arr.size > 1 else 0.0
    return mean, sd


def format_parameter_count(count) -> str:
    """Human-scale parameter count: 38,803 -> '38.8k', 12_345_678 -> '12.3M'."""
    if count is None:
        return "-"
    count = int(count)
    if count >= 10**6:
        return f"{count / 10**6:.1f}M"
    if count >= 10**3:
        return f"{count / 10**3:.1f}k"
    return str(count)


def format_table(headers, rows) -> str:
    """Align columns: first column left, the rest right."""
    cells = [list(map(str, headers))] + [list(map(str, row)) for row in rows]
    widths = [max(len(row[i]) for row in cells) for i in range(len(headers))]
    lines = []
    for index, row in enumerate(cells):
        padded = [
            row[0].ljust(widths[0]),
            *(cell.rjust(width) for cell, width in zip(row[1:], widths[1:])),
        ]
        lines.append(" | ".join(padded).rstrip())
        if index == 0:
            lines.append("-+-".join("-" * width for width in widths))
    return "\n".join(lines) + "\n"


def _fmt(value, digits=3) -> str:
    return "-" if value is None else f"{value:.{digits}f}"


def metric_rows(experiments) -> list:
    """Cross-validation mean +/- sd of the goal metrics per experiment,
    recomputed from each experiment's best trial record, plus the held-out
    test values from the summary."""
    rows = []
    for exp in experiments:
        best = select_best(exp.records)
        view = ResultView(
            name=exp.name,
            fold_validation_ids=(),
            fold_reports=best.fold_reports,
        )
        precision_mean, precision_sd = _mean_sd(
            fold_metric_values(view, "mounted_precision")
        )
        recall_mean, recall_sd = _mean_sd(
            fold_metric_values(view, "jammed_recall")
        )
        accuracy_mean, accuracy_sd = _mean_sd(
            [r.accuracy for r in best.fold_reports]
        )
        test = exp.summary["test_report"]
        rows.append(
            {
                "name": exp.name,
                "folds": len(best.fold_reports),
                "mounted_precision_mean": precision_mean,
                "mounted_precision_sd": precision_sd,
                "jammed_recall_mean": recall_mean,
                "jammed_recall_sd": recall_sd,
                "accuracy_mean": accuracy_mean,
                "accuracy_sd": accuracy_sd,
                "test_mounted_precision": test["mounted_precision"],
                "test_jammed_recall": test["jammed_recall"],
            }
        )
    return rows


def metric_table_text(experiments) -> str:
    headers = (
        "experiment",
        "folds",
        "mounted precision",
        "jammed recall",
        "accuracy",
        "test precision",
        "test recall",
    )
    rows = []
    for row in metric_rows(experiments):
        rows.append(
            (
                row["name"],
                row["folds"],
                f"{row['mounted_precision_mean']:.3f} ± "
                f"{row['mounted_precision_sd']:.3f}",
                f"{row['jammed_recall_mean']:.3f} ± {row['jammed_recall_sd']:.3f}",
                f"{row['accuracy_mean']:.3f} ± {row['accuracy_sd']:.3f}",
                _fmt(row["test_mounted_precision"]),
                _fmt(row["test_jammed_recall"]),
            )
        )
    return format_table(headers, rows)


def parameter_rows(experiments) -> list:
    """One row per sampled trial so every configuration's count appears."""
    rows = []
    for exp in experiments:
        best_index = select_best(exp.records).trial_index
        for record in exp.records:
            rows.append(
                {
                    "name": exp.name,
                    "trial": record.trial_index,
                    "kind": record.hyperparams.kind,
                    "parameter_count": record.parameter_count,
                    "objective": record.objective,
                    "failed": record.failed,
                    "best": record.trial_index == best_index,
                }
            )
    return rows


def parameter_table_text(experiments) -> str:
    headers = ("experiment", "trial", "kind", "parameters", "objective", "note")
    rows = []
    for row in parameter_rows(experiments):
        note = "best" if row["best"] else ("failed" if row["failed"] else "")
        rows.append(
            (
                row["name"],
                row["trial"],
                row["kind"],
                format_parameter_count(row["parameter_count"]),
                f"{row['objective']:.3f}",
                note,
            )
        )
    return format_table(headers, rows)


def pvalue_matrix(experiments, metric="mounted_precision") -> PairwiseComparison:
    return compare([exp.view() for exp in experiments], metric)


def pvalue_table_text(comparison: PairwiseComparison) -> str:
    names = comparison.names
    headers = (f"p ({comparison.metric})", *names)
    rows = []
    for i, name in enumerate(names):
        row = [name]
        for j in range(len(names)):
            if i == j:
                row.append("-")
            else:
                key = (min(i, j), max(i, j))
                row.append(f"{comparison.entries[key].p_value:.4f}")
        rows.append(tuple(row))
    return format_table(headers, rows)


def render_charts(experiments, out_dir) -> list:
    """Bar charts of mean mounted precision with standard-error bars, one
    file per rotation condition, bars grouped by model kind."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    by_rotation = {}
    for exp in experiments:
        key = bool(exp.summary["include_rotation"])
        by_rotation.setdefault(key, []).append(exp)

    written = []
    for include_rotation, group in sorted(by_rotation.items()):
        group = sorted(group, key=lambda e: (e.summary["model_kind"], e.name))
        means, errors, labels, positions = [], [], [], []
        cursor = 0.0
        previous_kind = None
        for exp in group:
            kind = exp.summary["model_kind"]
            if previous_kind is not None and kind != previous_kind:
                cursor += 0.6  # gap between model groups
            previous_kind = kind
            best = select_best(exp.records)
            view = ResultView(exp.name, (), best.fold_reports)
            values = fold_metric_values(view, "mounted_precision")
            mean, sd = _mean_sd(values)
            means.append(mean)
            errors.append(sd / math.sqrt(len(values)) if values else 0.0)
            labels.append(exp.name)
            positions.append(cursor)
            cursor += 1.0

        fig, ax = plt.subplots(figsize=(max(6.0, 1.1 * len(group)), 4.0))
        ax.bar(positions, means, yerr=errors, width=0.8, capsize=3)
        ax.set_xticks(positions)
        ax.set_xticklabels(labels, rotation=30, ha="right", fontsize=8)
        ax.set_ylim(0.0, 1.0)
        ax.set_ylabel("mounted precision (mean ± s.e. across folds)")
        condition = "rz" if include_rotation else "ft"
        ax.set_title(
            "Mounted precision by experiment "
            f"({'with' if include_rotation else 'without'} rotation channels)"
        )
        fig.tight_layout()
        path = out_dir / f"mounted_precision_{condition}.svg"
        fig.savefig(path, format="svg")
        plt.close(fig)
        written.append(path)
    return written


def write_reports(experiments, out_dir, metrics=("mounted_precision", "jammed_recall")) -> list:
    """Emit all report files for the given experiments; returns the paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []

    def emit(name, text, payload):
        text_path = out_dir / f"{name}.txt"
        text_path.write_text(text, encoding="utf-8")
        json_path = out_dir / f"{name}.json"
        json_path.write_text(
            json.dumps(payload, indent=2) + "\n", encoding="utf-8"
        )
        written.extend([text_path, json_path])

    emit("metrics", metric_table_text(experiments), metric_rows(experiments))
    emit(
        "parameters",
        parameter_table_text(experiments),
        parameter_rows(experiments),
    )
    if len(experiments) >= 2:
        for metric in metrics:
            comparison = pvalue_matrix(experiments, metric)
            emit(
                f"pvalues_{metric}",
                pvalue_table_text(comparison),
                comparison.to_dict(),
            )
    written.extend(render_charts(experiments, out_dir))
    return written
