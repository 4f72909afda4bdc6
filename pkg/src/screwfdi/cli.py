"""Command-line entry point.

Subcommands:
  gen-data   write a simulated dataset (manifest + per-sample CSVs)
  run        execute one experiment: search, final evaluation, reports
  compare    pairwise paired t-tests between persisted results
  report     regenerate report files from persisted records

Exit codes are stable: 0 success, 2 configuration error, 3 data error,
4 runtime failure. The environment variable SCREWFDI_OUT sets the default
output root for commands invoked without --out.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .config import (
    experiment_config_to_dict,
    load_experiment_config,
    load_gen_data_config,
)
from .datasets import LABEL_NAMES, save_dataset, simulate
from .errors import (
    ConfigurationError,
    DegenerateInputError,
    ExperimentFailure,
    IngestionError,
    NumericError,
    TrainingDiverged,
)
from .pipeline import optimize
from .reports import (
    SUMMARY_FILENAME,
    load_experiment,
    metric_table_text,
    pvalue_matrix,
    pvalue_table_text,
    write_reports,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_RUNTIME = 4

OUTPUT_ROOT_ENV = "SCREWFDI_OUT"

_METRIC_FLAGS = {
    "mounted-precision": "mounted_precision",
    "jammed-recall": "jammed_recall",
}


def _default_root() -> Path:
    return Path(os.environ.get(OUTPUT_ROOT_ENV, "screwfdi-out"))


def _resolve_out(args, fallback: str) -> Path:
    if args.out:
        return Path(args.out)
    return _default_root() / fallback


def _claim_out_dir(path: Path, force: bool) -> Path:
    """Refuse to write into a non-empty directory unless --force is given."""
    if path.exists():
        if not path.is_dir():
            raise ConfigurationError(f"output path {path} exists and is not a directory")
        if any(path.iterdir()) and not force:
            raise ConfigurationError(
                f"output directory {path} is not empty; pass --force to overwrite"
            )
    path.mkdir(parents=True, exist_ok=True)
    return path


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="screwfdi",
        description=(
            "Failure detection for threaded-fastener assembly: data "
            "generation, model search, statistical comparison, reports."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen-data", help="write a simulated dataset")
    gen.add_argument("--config", required=True, help="gen-data config JSON")
    gen.add_argument("--out", help="output directory")
    gen.add_argument("--seed", type=int, help="override the simulator seed")
    gen.add_argument("--force", action="store_true",
                     help="overwrite a non-empty output directory")

    run = sub.add_parser("run", help="run one experiment end to end")
    run.add_argument("--config", required=True, help="experiment config JSON")
    run.add_argument("--out", help="output directory")
    run.add_argument("--seed", type=int, help="override the master seed")
    run.add_argument("--jobs", type=int, default=os.cpu_count() or 1,
                     help="parallel trial workers (default: available cores)")
    run.add_argument("--force", action="store_true",
                     help="overwrite a non-empty output directory")

    cmp_parser = sub.add_parser(
        "compare", help="paired t-tests between persisted results"
    )
    cmp_parser.add_argument("results", nargs="+", help="result directories")
    cmp_parser.add_argument(
        "--metric",
        choices=sorted(_METRIC_FLAGS),
        default="mounted-precision",
        help="fold metric to compare",
    )
    cmp_parser.add_argument("--out", help="also write the table to this directory")

    rep = sub.add_parser("report", help="regenerate reports from records")
    rep.add_argument("results", nargs="+", help="result directories")
    rep.add_argument("--out", help="report output directory")

    return parser


def _cmd_gen_data(args) -> int:
    sim = load_gen_data_config(args.config, args.seed)
    out = _claim_out_dir(_resolve_out(args, "dataset"), args.force)
    dataset = simulate(sim)
    manifest = save_dataset(dataset, str(out))
    counts = dataset.class_counts()
    print(f"wrote {len(dataset)} samples to {manifest}")
    for label, name in enumerate(LABEL_NAMES):
        print(f"  {name}: {int(counts[label])}")
    return EXIT_OK


def _cmd_run(args) -> int:
    cfg = load_experiment_config(args.config, args.seed)
    out = _claim_out_dir(_resolve_out(args, cfg.resolved_name()), args.force)
    (out / "config.json").write_text(
        json.dumps(experiment_config_to_dict(cfg), indent=2) + "\n",
        encoding="utf-8",
    )
    jobs = max(1, args.jobs)
    result = optimize(cfg, records_path=out / "records.jsonl", jobs=jobs)
    (out / SUMMARY_FILENAME).write_text(
        json.dumps(result.summary_dict(), indent=2) + "\n", encoding="utf-8"
    )
    experiment = load_experiment(out)
    write_reports([experiment], out)
    best = result.best
    print(f"experiment {result.name}: {len(result.records)} trials")
    print(
        f"best trial {best.trial_index} "
        f"(objective {best.objective:.4f}, "
        f"{best.parameter_count} parameters)"
    )
    test = result.test_report
    precision = test.mounted_precision
    recall = test.jammed_recall
    print(
        "test split: "
        f"mounted precision {precision if precision is None else f'{precision:.4f}'}, "
        f"jammed recall {recall if recall is None else f'{recall:.4f}'}"
    )
    print(f"results in {out}")
    return EXIT_OK


def _cmd_compare(args) -> int:
    if len(args.results) < 2:
        raise ConfigurationError("compare needs at least two result directories")
    experiments = [load_experiment(d) for d in args.results]
    metric = _METRIC_FLAGS[args.metric]
    comparison = pvalue_matrix(experiments, metric)
    text = pvalue_table_text(comparison)
    print(text, end="")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / f"pvalues_{metric}.txt").write_text(text, encoding="utf-8")
        (out / f"pvalues_{metric}.json").write_text(
            json.dumps(comparison.to_dict(), indent=2) + "\n", encoding="utf-8"
        )
        print(f"written to {out}")
    return EXIT_OK


def _cmd_report(args) -> int:
    experiments = [load_experiment(d) for d in args.results]
    out = _resolve_out(args, "reports")
    out.mkdir(parents=True, exist_ok=True)
    paths = write_reports(experiments, out)
    print(metric_table_text(experiments), end="")
    for path in paths:
        print(f"wrote {path}")
    return EXIT_OK


_DISPATCH = {
    "gen-data": _cmd_gen_data,
    "run": _cmd_run,
    "compare": _cmd_compare,
    "report": _cmd_report,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _DISPATCH[args.command](args)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (IngestionError, DegenerateInputError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (ExperimentFailure, TrainingDiverged, NumericError, OSError) as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
