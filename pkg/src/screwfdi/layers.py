"""Neural network layers assembled from the autodiff primitives.

Each layer is declared with its hyperparameters, then `build(in_shape, rng)`
allocates parameters for a concrete per-sample input shape and returns the
per-sample output shape. `Network` chains layers with shape inference and
raises a `ConfigurationError` naming both offending layers when shapes do
not line up.

Shape conventions (per sample, batch axis excluded):
  dense-style input   (features,)           batched as [B, features]
  channel time series (channels, steps)     batched as [B, C, T]
  token sequences     (steps, width)        batched as [B, T, d]
"""

from __future__ import annotations

import math

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import ConfigurationError

_ACTIVATIONS = {
    None: lambda x: x,
    "relu": ad.relu,
    "tanh": ad.tanh,
    "sigmoid": ad.sigmoid,
}


def _uniform_fan_in(rng, shape, fan_in):
    bound = 1.0 / math.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


class Layer:
    """Base class: subclasses define build/forward and expose parameters."""

    name = None  # assigned by Network

    def build(self, in_shape, rng):
        raise NotImplementedError

    def forward(self, x, training=False, rng=None):
        raise NotImplementedError

    def parameters(self):
        """Locally named parameter tensors, as (name, Tensor) pairs."""
        return []

    def decay_parameters(self):
        """Local names of parameters subject to L2 regularization."""
        return []


class Dense(Layer):
    """Affine map over the last axis, with an optional activation.

    Works on [B, features] and on token sequences [B, T, features] alike.
    """

    def __init__(self, units, activation="relu"):
        if units < 1:
            raise ConfigurationError(f"dense units must be >= 1, got {units}")
        self.units = int(units)
        self.activation = activation
        self.kernel = None
        self.bias = None

    def build(self, in_shape, rng):
        if len(in_shape) < 1:
            raise ConfigurationError("dense layer needs at least one input axis")
        fan_in = in_shape[-1]
        self.kernel = Tensor(
            _uniform_fan_in(rng, (fan_in, self.units), fan_in), requires_grad=True
        )
        self.bias = Tensor(np.zeros(self.units), requires_grad=True)
        return in_shape[:-1] + (self.units,)

    def forward(self, x, training=False, rng=None):
        out = ad.matmul(x, self.kernel) + self.bias
        return _ACTIVATIONS[self.activation](out)

    def parameters(self):
        return [("kernel", self.kernel), ("bias", self.bias)]

    def decay_parameters(self):
        return ["kernel"]


class Conv1D(Layer):
    """Valid 1-D convolution over (channels, steps) input."""

    def __init__(self, filters, kernel_size, stride=1, activation="relu"):
        self.filters = int(filters)
        self.kernel_size = int(kernel_size)
        self.stride = int(stride)
        self.activation = activation
        self.kernel = None
        self.bias = None

    def build(self, in_shape, rng):
        if len(in_shape) != 2:
            raise ConfigurationError(
                f"conv1d expects (channels, steps) input, got {in_shape}"
            )
        channels, steps = in_shape
        if steps < self.kernel_size:
            raise ConfigurationError(
                f"conv1d kernel {self.kernel_size} exceeds input length {steps}"
            )
        fan_in = channels * self.kernel_size
        self.kernel = Tensor(
            _uniform_fan_in(rng, (self.filters, channels, self.kernel_size), fan_in),
            requires_grad=True,
        )
        self.bias = Tensor(np.zeros(self.filters), requires_grad=True)
        out_steps = (steps - self.kernel_size) // self.stride + 1
        return (self.filters, out_steps)

    def forward(self, x, training=False, rng=None):
        out = ad.conv1d(x, self.kernel, self.bias, stride=self.stride)
        return _ACTIVATIONS[self.activation](out)

    def parameters(self):
        return [("kernel", self.kernel), ("bias", self.bias)]


class MaxPool1D(Layer):
    def __init__(self, pool):
        self.pool = int(pool)

    def build(self, in_shape, rng):
        channels, steps = in_shape
        out_steps = steps // self.pool
        if out_steps < 1:
            raise ConfigurationError(
                f"pooling of size {self.pool} collapses length {steps} below 1"
            )
        return (channels, out_steps)

    def forward(self, x, training=False, rng=None):
        return ad.max_pool1d(x, self.pool)


class AvgPool1D(MaxPool1D):
    def forward(self, x, training=False, rng=None):
        return ad.avg_pool1d(x, self.pool)


class Dropout(Layer):
    """Inverted dropout; the identity in inference mode."""

    def __init__(self, p):
        if not 0.0 <= p < 1.0:
            raise ConfigurationError(f"dropout probability must be in [0, 1), got {p}")
        self.p = float(p)

    def build(self, in_shape, rng):
        return in_shape

    def forward(self, x, training=False, rng=None):
        return ad.dropout(x, self.p, rng, training)


class Flatten(Layer):
    def build(self, in_shape, rng):
        self.in_shape = in_shape
        return (int(np.prod(in_shape)),)

    def forward(self, x, training=False, rng=None):
        return ad.reshape(x, (x.shape[0], -1))


class Softmax(Layer):
    """Softmax over the last axis (kept out of the classifiers, which emit logits)."""

    def build(self, in_shape, rng):
        return in_shape

    def forward(self, x, training=False, rng=None):
        return ad.softmax(x, axis=-1)


class LayerNorm(Layer):
    """Normalization over the last axis with learned scale and shift."""

    EPS = 1e-5

    def __init__(self):
        self.scale = None
        self.shift = None

    def build(self, in_shape, rng):
        width = in_shape[-1]
        self.scale = Tensor(np.ones(width), requires_grad=True)
        self.shift = Tensor(np.zeros(width), requires_grad=True)
        return in_shape

    def forward(self, x, training=False, rng=None):
        mu = ad.tmean(x, axis=-1, keepdims=True)
        centered = x - mu
        var = ad.tmean(centered * centered, axis=-1, keepdims=True)
        inv = ad.power(var + self.EPS, -0.5)
        return centered * inv * self.scale + self.shift

    def parameters(self):
        return [("scale", self.scale), ("shift", self.shift)]


class SwapChannelsTime(Layer):
    """(channels, steps) -> (steps, channels); feeds sequence models."""

    def build(self, in_shape, rng):
        if len(in_shape) != 2:
            raise ConfigurationError(f"expected a rank-2 input, got {in_shape}")
        return (in_shape[1], in_shape[0])

    def forward(self, x, training=False, rng=None):
        return ad.transpose(x, (0, 2, 1))


class SequenceMean(Layer):
    """Mean over the token axis: (steps, width) -> (width,)."""

    def build(self, in_shape, rng):
        return (in_shape[1],)

    def forward(self, x, training=False, rng=None):
        return ad.tmean(x, axis=1)


class PositionalEmbedding(Layer):
    """Learned additive position table, sliced to the incoming length."""

    def __init__(self, max_len=128):
        self.max_len = int(max_len)
        self.table = None

    def build(self, in_shape, rng):
        steps, width = in_shape
        if steps > self.max_len:
            raise ConfigurationError(
                f"sequence length {steps} exceeds positional capacity {self.max_len}"
            )
        self.table = Tensor(
            _uniform_fan_in(rng, (self.max_len, width), width), requires_grad=True
        )
        return in_shape

    def forward(self, x, training=False, rng=None):
        steps = x.shape[1]
        if steps > self.max_len:
            raise ConfigurationError(
                f"sequence length {steps} exceeds positional capacity {self.max_len}"
            )
        return x + ad.narrow(self.table, 0, 0, steps)

    def parameters(self):
        return [("table", self.table)]


class MultiHeadAttention(Layer):
    """Scaled dot-product self-attention over (steps, width) tokens."""

    def __init__(self, width, heads):
        if width % heads != 0:
            raise ConfigurationError(f"width {width} not divisible by {heads} heads")
        self.width = int(width)
        self.heads = int(heads)
        self.head_dim = self.width // self.heads
        self.proj = {}

    def build(self, in_shape, rng):
        steps, width = in_shape
        if width != self.width:
            raise ConfigurationError(
                f"attention width {self.width} does not match input width {width}"
            )
        for key in ("query", "key", "value", "out"):
            self.proj[key] = (
                Tensor(_uniform_fan_in(rng, (width, width), width), requires_grad=True),
                Tensor(np.zeros(width), requires_grad=True),
            )
        return in_shape

    def _heads(self, x, key):
        w, b = self.proj[key]
        batch, steps = x.shape[0], x.shape[1]
        h = ad.matmul(x, w) + b
        h = ad.reshape(h, (batch, steps, self.heads, self.head_dim))
        return ad.transpose(h, (0, 2, 1, 3))  # [B, heads, T, head_dim]

    def forward(self, x, training=False, rng=None):
        batch, steps = x.shape[0], x.shape[1]
        q = self._heads(x, "query")
        k = self._heads(x, "key")
        v = self._heads(x, "value")
        scores = ad.matmul(q, ad.transpose(k, (0, 1, 3, 2))) * (
            1.0 / math.sqrt(self.head_dim)
        )
        attn = ad.softmax(scores, axis=-1)
        ctx = ad.matmul(attn, v)
        ctx = ad.reshape(ad.transpose(ctx, (0, 2, 1, 3)), (batch, steps, self.width))
        w_out, b_out = self.proj["out"]
        return ad.matmul(ctx, w_out) + b_out

    def parameters(self):
        return [
            (f"{key}.{part}", tensor)
            for key in ("query", "key", "value", "out")
            for part, tensor in zip(("kernel", "bias"), self.proj[key])
        ]


class TransformerBlock(Layer):
    """Pre-norm encoder block: attention and a position-wise feed-forward,
    each behind a residual connection. Feed-forward expands 4x."""

    FFN_MULTIPLE = 4

    def __init__(self, width, heads):
        self.width = int(width)
        self.norm1 = LayerNorm()
        self.attn = MultiHeadAttention(width, heads)
        self.norm2 = LayerNorm()
        self.ffn_expand = Dense(self.FFN_MULTIPLE * width, activation="relu")
        self.ffn_project = Dense(width, activation=None)

    def build(self, in_shape, rng):
        steps, width = in_shape
        if width != self.width:
            raise ConfigurationError(
                f"block width {self.width} does not match input width {width}"
            )
        for sub in (self.norm1, self.attn, self.norm2):
            sub.build(in_shape, rng)
        hidden_shape = self.ffn_expand.build(in_shape, rng)
        self.ffn_project.build(hidden_shape, rng)
        return in_shape

    def forward(self, x, training=False, rng=None):
        x = x + self.attn.forward(self.norm1.forward(x))
        hidden = self.ffn_expand.forward(self.norm2.forward(x))
        return x + self.ffn_project.forward(hidden)

    def parameters(self):
        named = []
        for prefix, sub in (
            ("norm1", self.norm1),
            ("attn", self.attn),
            ("norm2", self.norm2),
            ("ffn_expand", self.ffn_expand),
            ("ffn_project", self.ffn_project),
        ):
            named.extend((f"{prefix}.{local}", t) for local, t in sub.parameters())
        return named


class LSTMLayer(Layer):
    """Stack of standard four-gate LSTM cells unrolled over time.

    Input is token-major (steps, features). With `return_sequences` the full
    hidden trajectory comes back as (steps, hidden); otherwise only the final
    hidden state, shaped (hidden,). Handles any sequence length at forward
    time. The forget-gate bias starts at 1 so early training does not wipe
    the cell state.
    """

    def __init__(self, hidden, return_sequences=False):
        self.hidden = int(hidden)
        self.return_sequences = bool(return_sequences)
        self.w_input = None
        self.w_recurrent = None
        self.bias = None

    def build(self, in_shape, rng):
        if len(in_shape) != 2:
            raise ConfigurationError(
                f"lstm expects (steps, features) input, got {in_shape}"
            )
        steps, features = in_shape
        h = self.hidden
        fan_in = features + h
        self.w_input = Tensor(
            _uniform_fan_in(rng, (features, 4 * h), fan_in), requires_grad=True
        )
        self.w_recurrent = Tensor(
            _uniform_fan_in(rng, (h, 4 * h), fan_in), requires_grad=True
        )
        bias = np.zeros(4 * h)
        bias[h : 2 * h] = 1.0
        self.bias = Tensor(bias, requires_grad=True)
        return (steps, h) if self.return_sequences else (h,)

    def forward(self, x, training=False, rng=None):
        batch, steps = x.shape[0], x.shape[1]
        h = self.hidden
        hidden = Tensor(np.zeros((batch, h)))
        cell = Tensor(np.zeros((batch, h)))
        outputs = []
        for t in range(steps):
            x_t = ad.reshape(ad.narrow(x, 1, t, 1), (batch, -1))
            gates = ad.matmul(x_t, self.w_input) + ad.matmul(hidden, self.w_recurrent)
            gates = gates + self.bias
            gate_in = ad.sigmoid(ad.narrow(gates, 1, 0, h))
            gate_forget = ad.sigmoid(ad.narrow(gates, 1, h, h))
            candidate = ad.tanh(ad.narrow(gates, 1, 2 * h, h))
            gate_out = ad.sigmoid(ad.narrow(gates, 1, 3 * h, h))
            cell = gate_forget * cell + gate_in * candidate
            hidden = gate_out * ad.tanh(cell)
            if self.return_sequences:
                outputs.append(ad.reshape(hidden, (batch, 1, h)))
        if self.return_sequences:
            return ad.concat(outputs, axis=1)
        return hidden

    def parameters(self):
        return [
            ("w_input", self.w_input),
            ("w_recurrent", self.w_recurrent),
            ("bias", self.bias),
        ]


class Network:
    """An ordered layer stack with build-time shape inference.

    Parameters get stable dotted names (`dense_0.kernel`, ...) used by the
    optimizer, checkpoints, and error messages.
    """

    def __init__(self, layers, input_shape, rng):
        self.layers = list(layers)
        self.input_shape = tuple(int(d) for d in input_shape)
        counts = {}
        shape = self.input_shape
        previous = "input"
        for layer in self.layers:
            base = type(layer).__name__.lower()
            index = counts.get(base, 0)
            counts[base] = index + 1
            layer.name = f"{base}_{index}"
            try:
                shape = layer.build(shape, rng)
            except ConfigurationError as exc:
                raise ConfigurationError(
                    f"layer '{layer.name}' cannot consume the output of "
                    f"'{previous}' (shape {shape}): {exc}"
                ) from exc
            previous = layer.name
        self.output_shape = shape

    def forward(self, x, training=False, rng=None):
        if not isinstance(x, Tensor):
            x = Tensor(x)
        for layer in self.layers:
            x = layer.forward(x, training=training, rng=rng)
        return x

    def parameters(self):
        named = []
        for layer in self.layers:
            named.extend(
                (f"{layer.name}.{local}", t) for local, t in layer.parameters()
            )
        return named

    def decay_parameter_names(self):
        names = []
        for layer in self.layers:
            names.extend(f"{layer.name}.{local}" for local in layer.decay_parameters())
        return names

    def zero_grad(self):
        for _, tensor in self.parameters():
            tensor.zero_grad()

    def parameter_count(self):
        return sum(t.data.size for _, t in self.parameters())
