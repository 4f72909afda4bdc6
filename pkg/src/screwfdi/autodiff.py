"""Reverse-mode automatic differentiation over float64 numpy arrays.

A `Tensor` wraps an ndarray and remembers how it was produced. Calling
`backward()` on a scalar walks the graph in reverse topological order and
accumulates vector-Jacobian products into every reachable leaf that has
`requires_grad` set. Parameters that are not reachable from the loss read
back a zero gradient.

The op set is exactly what the classifier architectures in this package
need: elementwise arithmetic with broadcasting, batched matmul, shape ops,
activations, a numerically stable softmax, 1-D convolution and pooling,
inverted dropout, and a fused weighted cross-entropy head.
"""

from __future__ import annotations

import contextlib

import numpy as np

from .errors import NumericError

_GRAD_ENABLED = True


@contextlib.contextmanager
def no_grad():
    """Disable graph construction inside the block (cheap inference)."""
    global _GRAD_ENABLED
    prev = _GRAD_ENABLED
    _GRAD_ENABLED = False
    try:
        yield
    finally:
        _GRAD_ENABLED = prev


class Tensor:
    """A float64 array node in a reverse-mode differentiation graph.

    Attributes
    ----------
    data : np.ndarray
        The value, always float64. Treated as immutable once wrapped.
    requires_grad : bool
        Whether gradients flow to (or through) this node.
    name : str or None
        Set for parameters; used in optimizer diagnostics and checkpoints.
    """

    __slots__ = ("data", "requires_grad", "name", "_grad", "_parents", "_vjp")

    def __init__(self, data, requires_grad=False, name=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = bool(requires_grad)
        self.name = name
        self._grad = None
        self._parents = ()
        self._vjp = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def grad(self):
        """Accumulated gradient; zeros for untouched grad-tracking leaves."""
        if self._grad is None and self.requires_grad:
            return np.zeros_like(self.data)
        return self._grad

    def zero_grad(self):
        self._grad = None

    def detach(self):
        return Tensor(self.data)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    # -- operator sugar -------------------------------------------------
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return add(self, mul(other, -1.0))

    def __rsub__(self, other):
        return add(other, mul(self, -1.0))

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __pow__(self, exponent):
        return power(self, exponent)

    def backward(self):
        """Backpropagate from this scalar through the recorded graph."""
        if self.data.size != 1:
            raise ValueError(
                f"backward() requires a scalar, got shape {self.data.shape}"
            )
        order = _topo_order(self)
        grads = {id(self): np.ones_like(self.data)}
        for node in order:
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node._vjp is not None:
                for parent, pg in zip(node._parents, node._vjp(g)):
                    if pg is None or not parent.requires_grad:
                        continue
                    acc = grads.get(id(parent))
                    grads[id(parent)] = pg if acc is None else acc + pg
            elif node.requires_grad:
                # leaf: fold into the persistent gradient
                node._grad = g if node._grad is None else node._grad + g


def _topo_order(root):
    """Reverse topological order, iterative (graphs can be thousands deep)."""
    order = []
    seen = set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if id(parent) not in seen:
                stack.append((parent, False))
    order.reverse()
    return order


def _as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def _make(data, parents, vjp):
    """Wrap an op result, recording provenance only when it matters."""
    if _GRAD_ENABLED and any(p.requires_grad for p in parents):
        out = Tensor(data, requires_grad=True)
        out._parents = parents
        out._vjp = vjp
        return out
    return Tensor(data)


def _unbroadcast(grad, shape):
    """Sum `grad` down to `shape`, undoing numpy broadcasting."""
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


# -- arithmetic ---------------------------------------------------------

def add(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    out = a.data + b.data

    def vjp(g):
        return _unbroadcast(g, a.data.shape), _unbroadcast(g, b.data.shape)

    return _make(out, (a, b), vjp)


def mul(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    out = a.data * b.data

    def vjp(g):
        return (
            _unbroadcast(g * b.data, a.data.shape),
            _unbroadcast(g * a.data, b.data.shape),
        )

    return _make(out, (a, b), vjp)


def power(a, exponent):
    a = _as_tensor(a)
    exponent = float(exponent)
    out = a.data ** exponent

    def vjp(g):
        return (g * exponent * a.data ** (exponent - 1.0),)

    return _make(out, (a,), vjp)


def matmul(a, b):
    """Batched matrix product with broadcast over leading axes."""
    a, b = _as_tensor(a), _as_tensor(b)
    out = a.data @ b.data

    def vjp(g):
        ga = _unbroadcast(g @ np.swapaxes(b.data, -1, -2), a.data.shape)
        gb = _unbroadcast(np.swapaxes(a.data, -1, -2) @ g, b.data.shape)
        return ga, gb

    return _make(out, (a, b), vjp)


# -- reductions and shape ops ------------------------------------------

def tsum(a, axis=None, keepdims=False):
    a = _as_tensor(a)
    out = a.data.sum(axis=axis, keepdims=keepdims)

    def vjp(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, a.data.shape).copy(),)

    return _make(out, (a,), vjp)


def tmean(a, axis=None, keepdims=False):
    a = _as_tensor(a)
    if axis is None:
        count = a.data.size
    else:
        count = a.data.shape[axis]
    return mul(tsum(a, axis=axis, keepdims=keepdims), 1.0 / count)


def reshape(a, shape):
    a = _as_tensor(a)
    out = a.data.reshape(shape)

    def vjp(g):
        return (g.reshape(a.data.shape),)

    return _make(out, (a,), vjp)


def transpose(a, axes):
    a = _as_tensor(a)
    out = np.transpose(a.data, axes)
    inverse = np.argsort(axes)

    def vjp(g):
        return (np.transpose(g, inverse),)

    return _make(out, (a,), vjp)


def narrow(a, axis, start, length):
    """Slice `length` entries starting at `start` along `axis`."""
    a = _as_tensor(a)
    index = [slice(None)] * a.data.ndim
    index[axis] = slice(start, start + length)
    index = tuple(index)
    out = a.data[index]

    def vjp(g):
        full = np.zeros_like(a.data)
        full[index] = g
        return (full,)

    return _make(out, (a,), vjp)


def concat(tensors, axis):
    tensors = tuple(_as_tensor(t) for t in tensors)
    out = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.data.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def vjp(g):
        return tuple(np.split(g, splits, axis=axis))

    return _make(out, tensors, vjp)


# -- activations --------------------------------------------------------

def relu(a):
    a = _as_tensor(a)
    out = np.maximum(a.data, 0.0)

    def vjp(g):
        return (g * (a.data > 0.0),)

    return _make(out, (a,), vjp)


def sigmoid(a):
    a = _as_tensor(a)
    x = a.data
    out = np.where(x >= 0, 1.0 / (1.0 + np.exp(-np.abs(x))),
                   np.exp(-np.abs(x)) / (1.0 + np.exp(-np.abs(x))))

    def vjp(g):
        return (g * out * (1.0 - out),)

    return _make(out, (a,), vjp)


def tanh(a):
    a = _as_tensor(a)
    out = np.tanh(a.data)

    def vjp(g):
        return (g * (1.0 - out * out),)

    return _make(out, (a,), vjp)


def softmax(a, axis=-1):
    """Stable softmax along `axis`: shifts by the max before exponentiating."""
    a = _as_tensor(a)
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=axis, keepdims=True)

    def vjp(g):
        inner = (g * out).sum(axis=axis, keepdims=True)
        return (out * (g - inner),)

    return _make(out, (a,), vjp)


# -- structured ops -----------------------------------------------------

def dropout(a, p, rng, training):
    """Inverted dropout: scales survivors by 1/(1-p) so inference is identity.

    In inference mode the input tensor is returned unchanged.
    """
    if not training or p == 0.0:
        return _as_tensor(a)
    if not 0.0 <= p < 1.0:
        raise ValueError(f"dropout probability must be in [0, 1), got {p}")
    if rng is None:
        raise ValueError("training-mode dropout needs an rng")
    a = _as_tensor(a)
    mask = (rng.random(a.data.shape) >= p) / (1.0 - p)
    out = a.data * mask

    def vjp(g):
        return (g * mask,)

    return _make(out, (a,), vjp)


def conv1d(x, weight, bias, stride=1):
    """Valid (no padding) 1-D convolution.

    x: [batch, in_channels, steps]; weight: [filters, in_channels, kernel];
    bias: [filters]. Output: [batch, filters, (steps - kernel) // stride + 1].
    """
    x, weight, bias = _as_tensor(x), _as_tensor(weight), _as_tensor(bias)
    k = weight.data.shape[2]
    if x.data.shape[2] < k:
        raise ValueError(
            f"conv1d input length {x.data.shape[2]} shorter than kernel {k}"
        )
    windows = np.lib.stride_tricks.sliding_window_view(x.data, k, axis=2)
    windows = windows[:, :, ::stride]  # [B, C, T', K]
    out = np.einsum("bctk,fck->bft", windows, weight.data, optimize=True)
    out += bias.data[None, :, None]
    t_out = out.shape[2]

    def vjp(g):
        gw = np.einsum("bft,bctk->fck", g, windows, optimize=True)
        gb = g.sum(axis=(0, 2))
        gx = np.zeros_like(x.data)
        for kk in range(k):
            gx[:, :, kk : kk + stride * t_out : stride] += np.einsum(
                "bft,fc->bct", g, weight.data[:, :, kk], optimize=True
            )
        return gx, gw, gb

    return _make(out, (x, weight, bias), vjp)


def max_pool1d(x, pool):
    """Non-overlapping max pooling along time; a trailing remainder is dropped."""
    x = _as_tensor(x)
    b, c, t = x.data.shape
    t_out = t // pool
    if t_out < 1:
        raise ValueError(f"max_pool1d window {pool} exceeds length {t}")
    trimmed = x.data[:, :, : t_out * pool].reshape(b, c, t_out, pool)
    out = trimmed.max(axis=3)
    argmax = trimmed.argmax(axis=3)

    def vjp(g):
        gx = np.zeros_like(x.data)
        blocks = gx[:, :, : t_out * pool].reshape(b, c, t_out, pool)
        np.put_along_axis(blocks, argmax[..., None], g[..., None], axis=3)
        return (gx,)

    return _make(out, (x,), vjp)


def avg_pool1d(x, pool):
    """Non-overlapping mean pooling along time; a trailing remainder is dropped."""
    x = _as_tensor(x)
    b, c, t = x.data.shape
    t_out = t // pool
    if t_out < 1:
        raise ValueError(f"avg_pool1d window {pool} exceeds length {t}")
    out = x.data[:, :, : t_out * pool].reshape(b, c, t_out, pool).mean(axis=3)

    def vjp(g):
        gx = np.zeros_like(x.data)
        gx[:, :, : t_out * pool] = np.repeat(g / pool, pool, axis=2)
        return (gx,)

    return _make(out, (x,), vjp)


def weighted_cross_entropy(logits, labels, class_weights):
    """Mean over the batch of weight[label] * -log softmax(logits)[label].

    With all weights equal to 1 this is exactly the unweighted multinomial
    cross-entropy. Differentiable with respect to `logits` only.
    """
    logits = _as_tensor(logits)
    labels = np.asarray(labels, dtype=np.intp)
    w = np.asarray(class_weights, dtype=np.float64)
    if logits.data.ndim != 2:
        raise ValueError(f"logits must be [batch, classes], got {logits.data.shape}")
    batch, n_classes = logits.data.shape
    if batch == 0:
        raise ValueError("empty batch")
    if labels.shape != (batch,):
        raise ValueError(f"labels must have shape ({batch},), got {labels.shape}")
    if labels.min() < 0 or labels.max() >= n_classes:
        raise ValueError("labels out of range")
    if w.shape != (n_classes,) or not np.all(w > 0):
        raise ValueError(f"class_weights must be {n_classes} positive reals")
    if not np.all(np.isfinite(logits.data)):
        raise NumericError("non-finite logits passed to weighted_cross_entropy")

    shifted = logits.data - logits.data.max(axis=1, keepdims=True)
    log_z = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    log_p = shifted - log_z
    sample_w = w[labels]
    out = np.float64(-(sample_w * log_p[np.arange(batch), labels]).mean())

    def vjp(g):
        probs = np.exp(log_p)
        grad = probs * sample_w[:, None]
        grad[np.arange(batch), labels] -= sample_w
        return (grad * (g / batch), None, None)

    return _make(out, (logits, Tensor(labels.astype(np.float64)), Tensor(w)), vjp)
