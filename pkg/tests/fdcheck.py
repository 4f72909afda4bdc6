"""Central finite-difference gradient oracle, independent of the engine.

`loss_fn` must be a deterministic function of the parameter tensors' current
`.data` (re-seed any dropout inside it), returning a float. The oracle
perturbs raw numpy storage directly and never touches the reverse-mode code
paths it is used to check.
"""

import numpy as np

STEP = 1e-5


def numeric_gradient(loss_fn, array, indices, step=STEP):
    """d loss / d array[i] for each flat index i, by central differences."""
    flat = array.reshape(-1)
    grads = []
    for i in indices:
        saved = flat[i]
        flat[i] = saved + step
        hi = loss_fn()
        flat[i] = saved - step
        lo = loss_fn()
        flat[i] = saved
        grads.append((hi - lo) / (2.0 * step))
    return np.array(grads)


def assert_gradients_match(loss_fn, named_params, rtol=1e-4, atol=1e-7,
                           max_coords=6, rng=None):
    """Backprop once, then spot-check coordinates of every parameter tensor.

    Comparison: |analytic - numeric| <= atol + rtol * max(|analytic|, |numeric|).
    """
    rng = rng or np.random.default_rng(0)
    for _, t in named_params:
        t.zero_grad()
    loss = loss_fn()
    loss.backward()
    analytic = {name: np.array(t.grad, copy=True) for name, t in named_params}

    def scalar_loss():
        return float(loss_fn().data)

    for name, tensor in named_params:
        size = tensor.data.size
        count = min(max_coords, size)
        indices = rng.choice(size, size=count, replace=False)
        numeric = numeric_gradient(scalar_loss, tensor.data, indices)
        got = analytic[name].reshape(-1)[indices]
        err = np.abs(got - numeric)
        tol = atol + rtol * np.maximum(np.abs(got), np.abs(numeric))
        assert np.all(err <= tol), (
            f"gradient mismatch in '{name}': analytic {got}, numeric {numeric}"
        )
