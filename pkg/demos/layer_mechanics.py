#!/usr/bin/env python3
"""Walk through the building blocks: convolution, pooling, parameter
counting, one Adamax step, and a finite-difference gradient spot check."""

import numpy as np

from lwcnn.layers import Conv2D, MaxPool2
from lwcnn.network import NetworkConfig, param_count
from lwcnn.optim import AdamaxState, adamax_step

rng = np.random.default_rng(0)

# A 3x3 kernel with a single center 1 reproduces its input under same padding.
x = rng.standard_normal((1, 6, 6, 1)).astype(np.float32)
identity = np.zeros((3, 3, 1, 1), dtype=np.float32)
identity[1, 1, 0, 0] = 1.0
conv = Conv2D(identity, np.zeros(1, dtype=np.float32))
print("identity kernel max |out - in|:", np.abs(conv.forward(x) - x).max())

# An all-ones kernel counts each pixel's 3x3 neighborhood; corners see 4.
ones_img = np.ones((1, 3, 3, 1), dtype=np.float32)
counter = Conv2D(np.ones((3, 3, 1, 1), dtype=np.float32), np.zeros(1, dtype=np.float32))
print("neighborhood counts:\n", counter.forward(ones_img)[0, :, :, 0])

# Pooling halves spatial dims, dropping odd edges: 150 -> 75 -> 37 -> 18 -> 9.
pool = MaxPool2()
h = np.zeros((1, 150, 150, 1), dtype=np.float32)
trace = [150]
for _ in range(4):
    h = pool.forward(h)
    trace.append(h.shape[1])
print("pooling trace:", " -> ".join(str(t) for t in trace))

default = NetworkConfig()
tuned = NetworkConfig(filters=(32, 64, 128, 128), kernels=(4, 3, 3, 4),
                      dense_units=512, dropout_rate=0.5, learning_rate=1.19e-3)
print("default config parameters:", f"{param_count(default):,}")
print("tuned config parameters:  ", f"{param_count(tuned):,}")

# Adamax's very first update is close to lr * sign(gradient).
w = np.zeros(4, dtype=np.float64)
g = np.array([0.5, -2.0, 1e-3, 0.0])
state = AdamaxState.for_params([w], alpha=0.01)
adamax_step([w], [g], state)
print("first Adamax step:", w, "(lr was 0.01)")

# Central finite differences agree with the conv backward pass.
kernel = rng.standard_normal((3, 3, 2, 2))
bias = rng.standard_normal(2)
conv = Conv2D(kernel, bias)
x = rng.standard_normal((1, 5, 5, 2))
proj = rng.standard_normal((1, 5, 5, 2))

def loss() -> float:
    return float(np.sum(conv.forward(x) * proj))

conv.forward(x, training=True)  # backward reads the cached input columns
_, grad_kernel, _ = conv.backward(proj)
eps = 1e-5
kernel[0, 0, 0, 0] += eps
plus = loss()
kernel[0, 0, 0, 0] -= 2 * eps
minus = loss()
kernel[0, 0, 0, 0] += eps
numeric = (plus - minus) / (2 * eps)
print("analytic vs numeric dL/dk[0,0,0,0]:",
      float(grad_kernel[0, 0, 0, 0]), "vs", numeric)
