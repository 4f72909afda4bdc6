"""The five architectures and their search spaces.

Draws one random configuration per architecture, builds it on a realistic
input shape, and prints a parameter-count table; then shows what a failed
draw looks like (some convolutional stacks consume the whole sequence).

Run from the repository root:

    python3 demos/04_models.py
"""

import numpy as np

from screwfdi import ConfigurationError, build_model, count_parameters, sample_hyperparams
from screwfdi.models import KINDS

INPUT_SHAPE = (8, 64)  # eight channels, 64 PAA segments

# ---------------------------------------------------------------------------
# 1. One draw per architecture.
# ---------------------------------------------------------------------------
rng = np.random.default_rng(0)
print(f"input shape {INPUT_SHAPE}")
print()
print(f"{'kind':<12} {'parameters':>12}   configuration")
for kind in KINDS:
    hp = sample_hyperparams(kind, seed=4)
    model = build_model(hp, INPUT_SHAPE, rng)
    described = {
        k: v for k, v in hp.to_dict().items() if v is not None and k != "kind"
    }
    print(f"{kind:<12} {count_parameters(model):>12,}   {described}")

# ---------------------------------------------------------------------------
# 2. Predictions come back as plain label arrays.
# ---------------------------------------------------------------------------
hp = sample_hyperparams("LSTM", seed=4)
model = build_model(hp, INPUT_SHAPE, np.random.default_rng(1))
x = np.random.default_rng(2).standard_normal((5, *INPUT_SHAPE))
print()
print("untrained LSTM predictions on 5 random inputs:", model.predict(x))

# ---------------------------------------------------------------------------
# 3. Not every draw is buildable, and that is part of the contract: the
#    search records such trials as failed instead of crashing.
# ---------------------------------------------------------------------------
print()
for seed in range(60):
    hp = sample_hyperparams("CNN", seed=seed)
    try:
        build_model(hp, (8, 16), np.random.default_rng(0))
    except ConfigurationError as exc:
        print(f"CNN draw with seed {seed} cannot build on (8, 16):")
        print(f"  nl_dn={hp.nl_dn} k_dn={hp.k_dn} pool_dn={hp.pool_dn}")
        print(f"  {exc}")
        break
else:
    print("every CNN draw with seeds 0..59 built on (8, 16)")
