"""A tour of the reverse-mode autodiff engine.

Builds a few small graphs by hand, checks one gradient against a central
finite difference, then trains a softmax regression on a toy spiral with
the same Adam optimizer the full pipeline uses.

Run from the repository root:

    python3 demos/01_autodiff.py
"""

import numpy as np

from screwfdi import autodiff as ad
from screwfdi.autodiff import Tensor
from screwfdi.optim import Adam

rng = np.random.default_rng(0)

# ---------------------------------------------------------------------------
# 1. Tensors record the operations applied to them.
# ---------------------------------------------------------------------------
print("-- a tiny graph ------------------------------------------------------")
a = Tensor(np.array([[1.0, -2.0], [0.5, 3.0]]), requires_grad=True, name="a")
b = Tensor(np.array([[2.0], [-1.0]]), requires_grad=True, name="b")
out = ad.tsum(ad.relu(ad.matmul(a, b)))
out.backward()
print("value        :", float(out.data))
print("d out / d a  :\n", a.grad)
print("d out / d b  :\n", b.grad)

# ---------------------------------------------------------------------------
# 2. Analytic gradients agree with finite differences.
# ---------------------------------------------------------------------------
print()
print("-- finite-difference spot check -------------------------------------")
w = Tensor(rng.standard_normal((4, 3)), requires_grad=True, name="w")
x = rng.standard_normal((5, 4))
y = np.array([0, 1, 2, 1, 0])


def loss_value():
    logits = ad.matmul(Tensor(x), w)
    return float(ad.weighted_cross_entropy(logits, y, np.ones(3)).data)


logits = ad.matmul(Tensor(x), w)
loss = ad.weighted_cross_entropy(logits, y, np.ones(3))
loss.backward()

h = 1e-6
worst = 0.0
flat = w.data.reshape(-1)
for index in range(flat.size):
    keep = flat[index]
    flat[index] = keep + h
    upper = loss_value()
    flat[index] = keep - h
    lower = loss_value()
    flat[index] = keep
    numeric = (upper - lower) / (2 * h)
    analytic = w.grad.reshape(-1)[index]
    worst = max(worst, abs(numeric - analytic) / max(abs(numeric), 1e-12))
print(f"worst relative error over all {flat.size} entries: {worst:.2e}")

# ---------------------------------------------------------------------------
# 3. The same machinery trains a model: softmax regression on a 3-arm spiral.
# ---------------------------------------------------------------------------
print()
print("-- training a softmax regression with Adam ---------------------------")
points, labels = [], []
for k in range(3):
    t = np.linspace(0.15, 1.0, 120)
    angle = t * 4.0 + k * 2.0 * np.pi / 3 + 0.18 * rng.standard_normal(t.size)
    points.append(np.column_stack([t * np.cos(angle), t * np.sin(angle)]))
    labels.append(np.full(t.size, k))
features = np.concatenate(points)
targets = np.concatenate(labels)

# One hidden layer, written out longhand so every moving part is visible.
w1 = Tensor(0.5 * rng.standard_normal((2, 32)), requires_grad=True, name="w1")
b1 = Tensor(np.zeros(32), requires_grad=True, name="b1")
w2 = Tensor(0.5 * rng.standard_normal((32, 3)), requires_grad=True, name="w2")
b2 = Tensor(np.zeros(3), requires_grad=True, name="b2")
params = [("w1", w1), ("b1", b1), ("w2", w2), ("b2", b2)]
optimizer = Adam(params, lr=0.05)


def forward(batch):
    hidden = ad.relu(ad.matmul(Tensor(batch), w1) + b1)
    return ad.matmul(hidden, w2) + b2


for epoch in range(120):
    logits = forward(features)
    loss = ad.weighted_cross_entropy(logits, targets, np.ones(3))
    for _, p in params:
        p.zero_grad()
    loss.backward()
    optimizer.step()
    if epoch % 30 == 0 or epoch == 119:
        predicted = np.argmax(logits.data, axis=1)
        accuracy = float((predicted == targets).mean())
        print(f"epoch {epoch:3d}  loss {float(loss.data):.4f}  accuracy {accuracy:.3f}")

print()
print("The full pipeline never hand-writes layers like this; it goes through")
print("screwfdi.layers and screwfdi.models, but the gradients and the")
print("optimizer are exactly the ones shown here.")
