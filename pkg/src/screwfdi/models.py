"""The five classifier architectures and their hyperparameter search space.

Every model maps a preprocessed recording ``[C, S]`` to three logits
(mounted / not_mounted / jammed):

* **MLP** - flattened input through a stack of dense layers;
* **CNN** - 1-D convolution/pooling blocks, then the dense stack;
* **LSTM** - stacked recurrent layers, classifying from the last hidden
  state;
* **Transformer** - convolutional token embedding followed by pre-norm
  self-attention blocks, mean-pooled;
* **ViT** - convolutional temporal patching plus pooling, five attention
  blocks, then a dense stack.

:func:`sample_hyperparams` draws one configuration per (kind, seed) from the
per-architecture search ranges; :func:`build_model` turns a configuration
into a ready network.  Sequence models (LSTM, Transformer) accept inputs of
any length at inference; the fixed-geometry kinds reject length mismatches.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .errors import ConfigurationError
from .layers import (
    AvgPool1D,
    Conv1D,
    Dense,
    Dropout,
    Flatten,
    LSTMLayer,
    MaxPool1D,
    Network,
    PositionalEmbedding,
    SequenceMean,
    SwapChannelsTime,
    TransformerBlock,
)
from .seeding import TAG_INIT, TAG_SAMPLING, derive_rng

__all__ = [
    "KINDS",
    "NUM_CLASSES",
    "CNN_FILTERS",
    "LSTM_HIDDEN",
    "ATTENTION_HEAD_WIDTH",
    "POSITIONAL_CAPACITY",
    "HyperParams",
    "ModelInstance",
    "sample_hyperparams",
    "build_model",
    "count_parameters",
]

KINDS = ("MLP", "CNN", "LSTM", "Transformer", "ViT")
NUM_CLASSES = 3

# Architectural constants the search space does not sweep.
CNN_FILTERS = 32  # filters per convolutional block
LSTM_HIDDEN = 8  # recurrent state width
ATTENTION_HEAD_WIDTH = 16  # heads = embedding width / 16, minimum 1
POSITIONAL_CAPACITY = 128  # learned positional table length

_TRANSFORMER_WIDTHS = (16, 32, 64, 128, 256)  # powers of two, 2^4..2^8

# Per-kind search space. Each entry is one of:
#   ("int", lo, hi)        - uniform integer, both ends inclusive
#   ("float", lo, hi)      - uniform real in the half-open [lo, hi)
#   ("log", lo, hi)        - log-uniform real in [lo, hi]
#   ("choice", values)     - uniform pick from the tuple
#   ("fixed", value)       - the only admissible value
#   None                   - the field does not apply to this kind
_FIELD_ORDER = (
    "nl_fc",
    "nn_fc",
    "drop_fc",
    "l2_fc",
    "nl_dn",
    "k_dn",
    "pool_dn",
    "nn_tr",
)
_SEARCH_SPACE = {
    "MLP": {
        "nl_fc": ("int", 1, 10),
        "nn_fc": ("int", 1, 2048),
        "drop_fc": ("float", 0.0, 0.5),
        "l2_fc": ("log", 1e-3, 0.1),
        "nl_dn": None,
        "k_dn": None,
        "pool_dn": None,
        "nn_tr": None,
    },
    "CNN": {
        "nl_fc": ("int", 1, 6),
        "nn_fc": ("int", 1, 2048),
        "drop_fc": ("float", 0.0, 0.5),
        "l2_fc": ("log", 1e-3, 0.1),
        "nl_dn": ("int", 1, 8),
        "k_dn": ("choice", (1, 3, 5)),
        "pool_dn": ("choice", (1, 2)),
        "nn_tr": None,
    },
    "LSTM": {
        "nl_fc": ("fixed", 1),
        "nn_fc": ("fixed", 1),
        "drop_fc": ("float", 0.0, 0.5),
        "l2_fc": None,
        "nl_dn": ("int", 1, 5),
        "k_dn": None,
        "pool_dn": None,
        "nn_tr": None,
    },
    "Transformer": {
        "nl_fc": ("fixed", 1),
        "nn_fc": ("fixed", 64),
        "drop_fc": ("float", 0.0, 0.5),
        "l2_fc": None,
        "nl_dn": ("int", 1, 8),
        "k_dn": ("choice", (8, 16)),
        "pool_dn": None,
        "nn_tr": ("choice", _TRANSFORMER_WIDTHS),
    },
    "ViT": {
        "nl_fc": ("int", 1, 4),
        "nn_fc": ("fixed", 64),
        "drop_fc": ("float", 0.0, 0.5),
        "l2_fc": None,
        "nl_dn": ("fixed", 5),
        "k_dn": ("choice", (2, 3)),
        "pool_dn": ("choice", (2, 3)),
        "nn_tr": ("choice", _TRANSFORMER_WIDTHS),
    },
}


@dataclass(frozen=True)
class HyperParams:
    """One point in an architecture's search space.

    Fields that do not apply to the kind are ``None``; integer-valued
    fields are Python ints, ``drop_fc``/``l2_fc`` floats.
    """

    kind: str
    nl_fc: int | None = None
    nn_fc: int | None = None
    drop_fc: float | None = None
    l2_fc: float | None = None
    nl_dn: int | None = None
    k_dn: int | None = None
    pool_dn: int | None = None
    nn_tr: int | None = None

    def validate(self) -> None:
        if self.kind not in KINDS:
            raise ConfigurationError(
                f"model kind must be one of {KINDS}, got {self.kind!r}"
            )
        space = _SEARCH_SPACE[self.kind]
        for field in _FIELD_ORDER:
            value = getattr(self, field)
            spec = space[field]
            if spec is None:
                if value is not None:
                    raise ConfigurationError(
                        f"{self.kind}: field '{field}' does not apply "
                        f"but is set to {value!r}"
                    )
                continue
            if value is None:
                raise ConfigurationError(
                    f"{self.kind}: field '{field}' is required"
                )
            tag = spec[0]
            if tag == "int":
                _, lo, hi = spec
                if not (isinstance(value, int) and lo <= value <= hi):
                    raise ConfigurationError(
                        f"{self.kind}: '{field}' must be an integer in "
                        f"[{lo}, {hi}], got {value!r}"
                    )
            elif tag == "float":
                _, lo, hi = spec
                if not lo <= float(value) < hi:
                    raise ConfigurationError(
                        f"{self.kind}: '{field}' must lie in [{lo}, {hi}), "
                        f"got {value!r}"
                    )
            elif tag == "log":
                _, lo, hi = spec
                if not lo <= float(value) <= hi:
                    raise ConfigurationError(
                        f"{self.kind}: '{field}' must lie in [{lo}, {hi}], "
                        f"got {value!r}"
                    )
            elif tag == "choice":
                if value not in spec[1]:
                    raise ConfigurationError(
                        f"{self.kind}: '{field}' must be one of {spec[1]}, "
                        f"got {value!r}"
                    )
            else:  # fixed
                if value != spec[1]:
                    raise ConfigurationError(
                        f"{self.kind}: '{field}' is fixed at {spec[1]}, "
                        f"got {value!r}"
                    )

    def to_dict(self) -> dict:
        payload = {"kind": self.kind}
        for field in _FIELD_ORDER:
            value = getattr(self, field)
            if value is not None:
                payload[field] = value
        return payload

    @classmethod
    def from_dict(cls, payload: dict) -> "HyperParams":
        known = {"kind"} | set(_FIELD_ORDER)
        unknown = set(payload) - known
        if unknown:
            raise ConfigurationError(
                f"unknown hyperparameter field(s): {', '.join(sorted(unknown))}"
            )
        hp = cls(**payload)
        hp.validate()
        return hp


def sample_hyperparams(kind: str, seed: int) -> HyperParams:
    """Draw one configuration uniformly from the kind's search ranges."""
    if kind not in KINDS:
        raise ConfigurationError(
            f"model kind must be one of {KINDS}, got {kind!r}"
        )
    rng = derive_rng(seed, TAG_SAMPLING, KINDS.index(kind))
    values: dict = {}
    for field in _FIELD_ORDER:
        spec = _SEARCH_SPACE[kind][field]
        if spec is None:
            values[field] = None
            continue
        tag = spec[0]
        if tag == "int":
            values[field] = int(rng.integers(spec[1], spec[2] + 1))
        elif tag == "float":
            values[field] = float(rng.uniform(spec[1], spec[2]))
        elif tag == "log":
            values[field] = float(
                math.exp(rng.uniform(math.log(spec[1]), math.log(spec[2])))
            )
        elif tag == "choice":
            values[field] = int(spec[1][rng.integers(0, len(spec[1]))])
        else:  # fixed
            values[field] = spec[1]
    hp = HyperParams(kind=kind, **values)
    hp.validate()
    return hp


def _attention_heads(width: int) -> int:
    return max(1, width // ATTENTION_HEAD_WIDTH)


def _dense_stack(layers: list, count: int, units: int, p: float) -> None:
    for _ in range(count):
        layers.append(Dense(units, activation="relu"))
        layers.append(Dropout(p))


def _compose(hp: HyperParams) -> list:
    p = float(hp.drop_fc)
    if hp.kind == "MLP":
        layers: list = [Flatten()]
        _dense_stack(layers, hp.nl_fc, hp.nn_fc, p)
    elif hp.kind == "CNN":
        layers = []
        for _ in range(hp.nl_dn):
            layers.append(Conv1D(CNN_FILTERS, hp.k_dn, activation="relu"))
            if hp.pool_dn > 1:
                layers.append(MaxPool1D(hp.pool_dn))
        layers.append(Flatten())
        _dense_stack(layers, hp.nl_fc, hp.nn_fc, p)
    elif hp.kind == "LSTM":
        layers = [SwapChannelsTime()]
        for _ in range(hp.nl_dn - 1):
            layers.append(LSTMLayer(LSTM_HIDDEN, return_sequences=True))
        layers.append(LSTMLayer(LSTM_HIDDEN, return_sequences=False))
        layers.append(Dropout(p))
    elif hp.kind == "Transformer":
        width = hp.nn_tr
        layers = [
            # Non-overlapping convolutional token embedding.
            Conv1D(width, hp.k_dn, stride=hp.k_dn, activation=None),
            SwapChannelsTime(),
            PositionalEmbedding(POSITIONAL_CAPACITY),
        ]
        for _ in range(hp.nl_dn):
            layers.append(TransformerBlock(width, _attention_heads(width)))
        layers.append(SequenceMean())
        layers.append(Dropout(p))
    else:  # ViT
        width = hp.nn_tr
        layers = [
            Conv1D(width, hp.k_dn, stride=hp.k_dn, activation=None),
            AvgPool1D(hp.pool_dn),
            SwapChannelsTime(),
            PositionalEmbedding(POSITIONAL_CAPACITY),
        ]
        for _ in range(hp.nl_dn):
            layers.append(TransformerBlock(width, _attention_heads(width)))
        layers.append(SequenceMean())
        _dense_stack(layers, hp.nl_fc, hp.nn_fc, p)
    layers.append(Dense(NUM_CLASSES, activation=None))
    return layers


# Kinds whose geometry is baked in at build time; they reject inputs whose
# length differs from the build shape. LSTM and Transformer run on any
# length (the Transformer needs at least one full token patch).
_FIXED_LENGTH_KINDS = frozenset({"MLP", "CNN", "ViT"})


@dataclass
class ModelInstance:
    """A built network plus the hyperparameters that produced it."""

    hyperparams: HyperParams
    input_shape: tuple[int, int]
    network: Network

    @property
    def kind(self) -> str:
        return self.hyperparams.kind

    def _check_input(self, x: np.ndarray) -> None:
        if x.ndim != 3:
            raise ConfigurationError(
                f"expected a [batch, channels, steps] input, got shape "
                f"{x.shape}"
            )
        channels, steps = self.input_shape
        if x.shape[1] != channels:
            raise ConfigurationError(
                f"{self.kind} was built for {channels} channels, "
                f"got {x.shape[1]}"
            )
        if self.kind in _FIXED_LENGTH_KINDS and x.shape[2] != steps:
            raise ConfigurationError(
                f"{self.kind} was built for length {steps} and cannot run "
                f"on length {x.shape[2]}"
            )
        if self.kind == "Transformer" and x.shape[2] < self.hyperparams.k_dn:
            raise ConfigurationError(
                f"Transformer token patch {self.hyperparams.k_dn} exceeds "
                f"input length {x.shape[2]}"
            )
        if self.kind == "LSTM" and x.shape[2] < 1:
            raise ConfigurationError("LSTM needs at least one time step")

    def forward(self, x, training: bool = False, rng=None):
        """Logits tensor [batch, 3]; pass ``training=True`` for dropout."""
        arr = x.data if isinstance(x, ad.Tensor) else np.asarray(x, dtype=np.float64)
        self._check_input(arr)
        return self.network.forward(
            x if isinstance(x, ad.Tensor) else arr, training=training, rng=rng
        )

    def predict(self, x) -> np.ndarray:
        """Predicted class labels [batch] under inference mode."""
        with ad.no_grad():
            logits = self.forward(x, training=False)
        return np.argmax(logits.data, axis=1)

    def parameters(self):
        return self.network.parameters()

    def decay_parameter_names(self):
        return self.network.decay_parameter_names()

    def zero_grad(self):
        self.network.zero_grad()

    def parameter_count(self) -> int:
        return self.network.parameter_count()


def build_model(
    hp: HyperParams, input_shape, rng: np.random.Generator | None = None
) -> ModelInstance:
    """Construct a ready-to-train model for ``[C, S]`` inputs.

    ``rng`` seeds the weight initialization; omitted, a fixed default
    stream is used so repeated builds are identical.
    """
    hp.validate()
    shape = tuple(int(d) for d in input_shape)
    if len(shape) != 2 or shape[0] < 1 or shape[1] < 1:
        raise ConfigurationError(
            f"input_shape must be [channels, steps] with positive sizes, "
            f"got {input_shape}"
        )
    if rng is None:
        rng = derive_rng(0, TAG_INIT)
    network = Network(_compose(hp), shape, rng)
    if network.output_shape != (NUM_CLASSES,):
        raise ConfigurationError(
            f"model must end with {NUM_CLASSES} logits, got shape "
            f"{network.output_shape}"
        )
    return ModelInstance(hp, shape, network)


def count_parameters(model: ModelInstance) -> int:
    """Total scalar parameters across all tensors of the model."""
    return model.parameter_count()
