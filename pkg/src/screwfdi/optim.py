"""Adaptive-moment (Adam) parameter updates with optional L2 coupling.

The L2 coefficient is folded into the gradient (`g + l2 * w`) before the
moment update, restricted to the parameter names listed in `decay_names`;
dense-layer kernels are the intended targets.

The update loop is memory-bound for wide fully-connected models, so when
numba is installed the whole per-parameter update runs as one fused
compiled pass. The pure-numpy fallback applies the same arithmetic in the
same order, so both paths produce bit-identical results.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import NumericError

try:
    from numba import njit as _njit

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    _HAVE_NUMBA = False

if _HAVE_NUMBA:

    @_njit(cache=True)
    def _fused_adam(grad, m, v, p, beta1, beta2, eps, scale, correction2, l2):
        """One Adam update over flat views; returns False on non-finite
        gradients, leaving every array untouched."""
        n = grad.size
        for i in range(n):
            if not math.isfinite(grad[i]):
                return False
        for i in range(n):
            g = grad[i] + l2 * p[i] if l2 != 0.0 else grad[i]
            mi = m[i] * beta1 + (1.0 - beta1) * g
            vi = v[i] * beta2 + (1.0 - beta2) * (g * g)
            m[i] = mi
            v[i] = vi
            denom = math.sqrt(vi / correction2) + eps
            p[i] = p[i] - (mi / denom) * scale
        return True


class Adam:
    """Holds per-parameter first/second moment accumulators and a step count."""

    def __init__(self, params, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8,
                 l2=0.0, decay_names=()):
        if lr <= 0:
            raise ValueError(f"learning rate must be positive, got {lr}")
        if l2 < 0:
            raise ValueError(f"l2 coefficient must be non-negative, got {l2}")
        self.params = list(params)  # (name, Tensor) pairs
        self.lr = float(lr)
        self.beta1 = float(beta1)
        self.beta2 = float(beta2)
        self.eps = float(eps)
        self.l2 = float(l2)
        self.decay_names = frozenset(decay_names)
        self.step_count = 0
        self.moment1 = {name: np.zeros_like(t.data) for name, t in self.params}
        self.moment2 = {name: np.zeros_like(t.data) for name, t in self.params}
        # Two reusable scratch arrays sized to the largest parameter keep
        # the update loop allocation-free; for multi-million-parameter
        # models the temporaries would otherwise dominate the step cost.
        largest = max((t.data.size for _, t in self.params), default=0)
        self._scratch_a = np.empty(largest)
        self._scratch_b = np.empty(largest)

    def step(self):
        """Apply one update to every parameter from its accumulated gradient."""
        self.step_count += 1
        t = self.step_count
        correction1 = 1.0 - self.beta1 ** t
        correction2 = 1.0 - self.beta2 ** t
        for name, param in self.params:
            grad = param.grad
            l2 = self.l2 if name in self.decay_names else 0.0
            if _HAVE_NUMBA and self._contiguous(grad, param.data, name):
                ok = _fused_adam(
                    grad.ravel(),
                    self.moment1[name].ravel(),
                    self.moment2[name].ravel(),
                    param.data.ravel(),
                    self.beta1,
                    self.beta2,
                    self.eps,
                    self.lr / correction1,
                    correction2,
                    l2,
                )
                if not ok:
                    raise NumericError(
                        f"non-finite gradient in parameter '{name}'"
                    )
                continue
            if not np.isfinite(grad).all():
                raise NumericError(f"non-finite gradient in parameter '{name}'")
            work = self._scratch_a[: grad.size].reshape(grad.shape)
            tmp = self._scratch_b[: grad.size].reshape(grad.shape)
            if self.l2 != 0.0 and name in self.decay_names:
                np.multiply(param.data, self.l2, out=work)
                np.add(grad, work, out=work)
                grad = work
            m = self.moment1[name]
            v = self.moment2[name]
            # m = beta1*m + (1-beta1)*grad
            np.multiply(grad, 1.0 - self.beta1, out=tmp)
            np.multiply(m, self.beta1, out=m)
            np.add(m, tmp, out=m)
            # v = beta2*v + (1-beta2)*grad^2
            np.multiply(grad, grad, out=tmp)
            np.multiply(tmp, 1.0 - self.beta2, out=tmp)
            np.multiply(v, self.beta2, out=v)
            np.add(v, tmp, out=v)
            # param -= (lr/c1) * m / (sqrt(v/c2) + eps)
            np.divide(v, correction2, out=tmp)
            np.sqrt(tmp, out=tmp)
            np.add(tmp, self.eps, out=tmp)
            np.divide(m, tmp, out=tmp)
            np.multiply(tmp, self.lr / correction1, out=tmp)
            np.subtract(param.data, tmp, out=param.data)

    def _contiguous(self, grad, data, name):
        return (
            grad.flags["C_CONTIGUOUS"]
            and data.flags["C_CONTIGUOUS"]
            and self.moment1[name].flags["C_CONTIGUOUS"]
            and self.moment2[name].flags["C_CONTIGUOUS"]
        )

    def zero_grad(self):
        for _, param in self.params:
            param.zero_grad()
