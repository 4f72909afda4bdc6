"""Experiment and data-generation configuration files.

Configs are JSON with an explicit ``schema_version``. Parsing is strict:
unknown fields are rejected and every error names the dotted path of the
offending field (for example ``training.epochs``), so a typo never
silently falls back to a default.
"""

from __future__ import annotations

import dataclasses
import json
from pathlib import Path

from .datasets import SimulatorConfig
from .errors import ConfigurationError, IngestionError
from .imbalance import VariantSpec
from .pipeline import ExperimentConfig
from .preprocess import PreprocessConfig
from .training import TrainingConfig

CONFIG_SCHEMA_VERSION = 1

_MISSING = object()


def read_json(path) -> dict:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise IngestionError(f"cannot read config: {exc}", path=str(path)) from exc
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as exc:
        raise IngestionError(
            f"config is not valid JSON: {exc}", path=str(path), line=exc.lineno
        ) from exc
    if not isinstance(payload, dict):
        raise IngestionError(
            "config root must be a JSON object", path=str(path)
        )
    return payload


def _ctx(context: str, field: str) -> str:
    return f"{context}.{field}" if context else field


def _check_unknown(payload: dict, allowed, context: str) -> None:
    unknown = sorted(set(payload) - set(allowed))
    if unknown:
        raise ConfigurationError(
            f"{_ctx(context, unknown[0])}: unknown field "
            f"(known fields: {', '.join(sorted(allowed))})"
        )


def _get(payload: dict, field: str, context: str, default=_MISSING):
    if field in payload:
        return payload[field]
    if default is _MISSING:
        raise ConfigurationError(f"{_ctx(context, field)}: required field missing")
    return default


def _as_int(value, where: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigurationError(f"{where}: expected an integer, got {value!r}")
    return value


def _as_number(value, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigurationError(f"{where}: expected a number, got {value!r}")
    return float(value)


def _as_bool(value, where: str) -> bool:
    if not isinstance(value, bool):
        raise ConfigurationError(f"{where}: expected true or false, got {value!r}")
    return value


def _as_str(value, where: str) -> str:
    if not isinstance(value, str):
        raise ConfigurationError(f"{where}: expected a string, got {value!r}")
    return value


def _revalidate(obj, context: str):
    try:
        obj.validate()
    except ConfigurationError as exc:
        raise ConfigurationError(f"{context}: {exc}") from exc
    return obj


def parse_simulator(payload, context="simulator") -> SimulatorConfig:
    if not isinstance(payload, dict):
        raise ConfigurationError(f"{context}: expected an object")
    allowed = {
        "counts",
        "length",
        "noise",
        "ramp_slope",
        "plateau_level",
        "spike_height",
        "seed",
        "length_jitter",
        "corrupt_count",
    }
    _check_unknown(payload, allowed, context)
    counts = _get(payload, "counts", context)
    if not isinstance(counts, list) or len(counts) != 3:
        raise ConfigurationError(
            f"{_ctx(context, 'counts')}: expected a list of 3 integers"
        )
    counts = tuple(
        _as_int(c, f"{_ctx(context, 'counts')}[{i}]") for i, c in enumerate(counts)
    )
    kwargs = {"counts": counts}
    for field, convert in (
        ("length", _as_int),
        ("noise", _as_number),
        ("ramp_slope", _as_number),
        ("plateau_level", _as_number),
        ("spike_height", _as_number),
        ("seed", _as_int),
        ("length_jitter", _as_int),
        ("corrupt_count", _as_int),
    ):
        if field in payload:
            kwargs[field] = convert(payload[field], _ctx(context, field))
    return _revalidate(SimulatorConfig(**kwargs), context)


def parse_preprocess(payload, context="preprocess") -> PreprocessConfig:
    if not isinstance(payload, dict):
        raise ConfigurationError(f"{context}: expected an object")
    allowed = {"z_threshold", "target_length", "segments", "include_rotation"}
    _check_unknown(payload, allowed, context)
    kwargs = {}
    if "z_threshold" in payload:
        kwargs["z_threshold"] = _as_number(
            payload["z_threshold"], _ctx(context, "z_threshold")
        )
    if "target_length" in payload and payload["target_length"] is not None:
        kwargs["target_length"] = _as_int(
            payload["target_length"], _ctx(context, "target_length")
        )
    if "segments" in payload:
        kwargs["segments"] = _as_int(payload["segments"], _ctx(context, "segments"))
    if "include_rotation" in payload:
        kwargs["include_rotation"] = _as_bool(
            payload["include_rotation"], _ctx(context, "include_rotation")
        )
    return _revalidate(PreprocessConfig(**kwargs), context)


def parse_variant(payload, context="variant") -> VariantSpec:
    if not isinstance(payload, dict):
        raise ConfigurationError(f"{context}: expected an object")
    _check_unknown(payload, {"variant", "multiplier"}, context)
    kwargs = {"variant": _as_str(_get(payload, "variant", context), _ctx(context, "variant"))}
    if "multiplier" in payload:
        kwargs["multiplier"] = _as_int(
            payload["multiplier"], _ctx(context, "multiplier")
        )
    return _revalidate(VariantSpec(**kwargs), context)


def parse_training(payload, context="training") -> TrainingConfig:
    if not isinstance(payload, dict):
        raise ConfigurationError(f"{context}: expected an object")
    _check_unknown(payload, {"epochs", "batch_size", "learning_rate"}, context)
    kwargs = {}
    if "epochs" in payload:
        kwargs["epochs"] = _as_int(payload["epochs"], _ctx(context, "epochs"))
    if "batch_size" in payload:
        kwargs["batch_size"] = _as_int(
            payload["batch_size"], _ctx(context, "batch_size")
        )
    if "learning_rate" in payload:
        kwargs["learning_rate"] = _as_number(
            payload["learning_rate"], _ctx(context, "learning_rate")
        )
    return _revalidate(TrainingConfig(**kwargs), context)


def _check_schema_version(payload) -> None:
    version = _get(payload, "schema_version", "")
    if version != CONFIG_SCHEMA_VERSION:
        raise ConfigurationError(
            f"schema_version: expected {CONFIG_SCHEMA_VERSION}, got {version!r}"
        )


def parse_experiment(payload, base_dir=None) -> ExperimentConfig:
    """Parse an experiment config; relative data paths resolve against
    `base_dir` (normally the config file's directory)."""
    allowed = {
        "schema_version",
        "name",
        "model_kind",
        "data",
        "preprocess",
        "variant",
        "imbalance_mode",
        "smote_k",
        "trials",
        "folds",
        "training",
        "test_fraction",
        "master_seed",
    }
    _check_unknown(payload, allowed, "")
    _check_schema_version(payload)

    data = _get(payload, "data", "")
    if not isinstance(data, dict):
        raise ConfigurationError("data: expected an object")
    _check_unknown(data, {"path", "simulator"}, "data")
    if ("path" in data) == ("simulator" in data):
        raise ConfigurationError(
            "data: exactly one of 'path' and 'simulator' must be set"
        )
    data_path = None
    simulator = None
    if "path" in data:
        data_path = _as_str(data["path"], "data.path")
        if base_dir is not None and not Path(data_path).is_absolute():
            data_path = str(Path(base_dir) / data_path)
    else:
        simulator = parse_simulator(data["simulator"], "data.simulator")

    kwargs = {
        "model_kind": _as_str(_get(payload, "model_kind", ""), "model_kind"),
        "data_path": data_path,
        "simulator": simulator,
    }
    if "name" in payload:
        kwargs["name"] = _as_str(payload["name"], "name")
    if "preprocess" in payload:
        kwargs["preprocess"] = parse_preprocess(payload["preprocess"])
    if "variant" in payload:
        kwargs["variant"] = parse_variant(payload["variant"])
    if "imbalance_mode" in payload:
        kwargs["imbalance_mode"] = _as_str(
            payload["imbalance_mode"], "imbalance_mode"
        )
    for field in ("smote_k", "trials", "folds", "master_seed"):
        if field in payload:
            kwargs[field] = _as_int(payload[field], field)
    if "training" in payload:
        kwargs["training"] = parse_training(payload["training"])
    if "test_fraction" in payload:
        kwargs["test_fraction"] = _as_number(
            payload["test_fraction"], "test_fraction"
        )
    return ExperimentConfig(**kwargs).validate()


def parse_gen_data(payload) -> SimulatorConfig:
    """A gen-data config is just a schema version plus a simulator block."""
    _check_unknown(payload, {"schema_version", "simulator"}, "")
    _check_schema_version(payload)
    return parse_simulator(_get(payload, "simulator", ""), "simulator")


def load_experiment_config(path, seed_override=None) -> ExperimentConfig:
    cfg = parse_experiment(read_json(path), base_dir=Path(path).parent)
    if seed_override is not None:
        cfg = dataclasses.replace(cfg, master_seed=int(seed_override)).validate()
    return cfg


def load_gen_data_config(path, seed_override=None) -> SimulatorConfig:
    cfg = parse_gen_data(read_json(path))
    if seed_override is not None:
        cfg = dataclasses.replace(cfg, seed=int(seed_override))
        cfg.validate()
    return cfg


def experiment_config_to_dict(cfg: ExperimentConfig) -> dict:
    """Serialize back to the JSON layout (used to echo resolved configs)."""
    data = (
        {"path": cfg.data_path}
        if cfg.data_path is not None
        else {"simulator": dataclasses.asdict(cfg.simulator) | {
            "counts": list(cfg.simulator.counts)
        }}
    )
    return {
        "schema_version": CONFIG_SCHEMA_VERSION,
        "name": cfg.resolved_name(),
        "model_kind": cfg.model_kind,
        "data": data,
        "preprocess": dataclasses.asdict(cfg.preprocess),
        "variant": dataclasses.asdict(cfg.variant),
        "imbalance_mode": cfg.imbalance_mode,
        "smote_k": cfg.smote_k,
        "trials": cfg.trials,
        "folds": cfg.folds,
        "training": dataclasses.asdict(cfg.training),
        "test_fraction": cfg.test_fraction,
        "master_seed": cfg.master_seed,
    }
