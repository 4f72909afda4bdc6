"""Simulated screwing recordings and the leakage-safe preprocessing chain.

Generates a small dataset, walks one sample of each outcome class through
outlier cleaning, truncation, piecewise aggregate approximation and
normalization, and renders the class-typical torque/depth traces to an SVG
under demos/out/.

Run from the repository root:

    python3 demos/02_dataset_and_preprocessing.py
"""

from pathlib import Path

import numpy as np

from screwfdi import (
    PreprocessConfig,
    SimulatorConfig,
    apply_preprocessor,
    fit_preprocessor,
    simulate,
    stratified_split,
)

OUT = Path(__file__).parent / "out"
OUT.mkdir(exist_ok=True)

# ---------------------------------------------------------------------------
# 1. Generate an imbalanced dataset shaped like a real assembly log:
#    mostly successful mounts, some misses, few jams.
# ---------------------------------------------------------------------------
config = SimulatorConfig(
    counts=(120, 40, 24), length=96, noise=0.35, seed=7, length_jitter=6
)
dataset = simulate(config)
print("channels     :", ", ".join(dataset.channel_names))
print("class counts :", dict(zip(("mounted", "not_mounted", "jammed"),
                                 dataset.class_counts().tolist())))
lengths = sorted({s.length for s in dataset})
print(f"lengths      : {lengths[0]}..{lengths[-1]} steps (jittered)")

# ---------------------------------------------------------------------------
# 2. Split first, then fit the chain on the training side only. The held-out
#    side goes through the frozen chain and never influences any statistic.
# ---------------------------------------------------------------------------
train_raw, test_raw = stratified_split(dataset, 0.2, seed=1)
chain = PreprocessConfig(segments=24, z_threshold=4.0)
train, state = fit_preprocessor(train_raw, chain)
test = apply_preprocessor(state, test_raw)

print()
print(f"train {len(train_raw)} -> {len(train)} after cleaning "
      f"(removed {len(state.cleaning.removed_ids)} outliers, "
      f"z threshold {state.cleaning.threshold})")
print(f"common length {state.target_length} steps -> {chain.segments} PAA segments")
print("per-channel train mean:", np.round(state.stats.mean, 3))
print("per-channel train std :", np.round(state.stats.std, 3))

pooled = np.concatenate([s.channels for s in train], axis=1)
print("normalized train mean  ~", np.round(pooled.mean(axis=1), 6))
print("normalized train std   ~", np.round(pooled.std(axis=1), 6))

# ---------------------------------------------------------------------------
# 3. What the classes look like: driving torque (tz) and feed depth (dz).
#    A jam shows up as a mid-thread torque spike while the feed stalls.
# ---------------------------------------------------------------------------
import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

tz = dataset.channel_names.index("Tz")
dz = dataset.channel_names.index("Dz")
fig, axes = plt.subplots(2, 3, figsize=(10, 5), sharex=True)
for column, label_name in enumerate(("mounted", "not_mounted", "jammed")):
    picks = [s for s in dataset if s.label_name == label_name][:6]
    for sample in picks:
        axes[0][column].plot(sample.channels[tz], lw=0.8)
        axes[1][column].plot(sample.channels[dz], lw=0.8)
    axes[0][column].set_title(label_name)
axes[0][0].set_ylabel("torque Tz")
axes[1][0].set_ylabel("depth Dz")
for ax in axes[1]:
    ax.set_xlabel("time step")
fig.tight_layout()
target = OUT / "class_signatures.svg"
fig.savefig(target)
print()
print(f"wrote {target}")

# ---------------------------------------------------------------------------
# 4. PAA is just a row-stochastic averaging matrix; shapes tell the story.
# ---------------------------------------------------------------------------
sample = train[0]
print()
print(f"sample '{sample.sample_id}' after the chain: "
      f"{sample.num_channels} channels x {sample.length} segments "
      f"(label {sample.label_name})")
