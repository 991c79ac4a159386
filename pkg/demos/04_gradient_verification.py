"""Check the hand-written backward passes against finite differences.

Run:  python demos/04_gradient_verification.py
"""

import numpy as np

from risnoma.nn import Adam, Mlp, finite_difference_gradient

rng = np.random.default_rng(0)
net = Mlp([4, 8, 8, 2], rng)
x = rng.standard_normal((16, 4))
target = rng.standard_normal((16, 2))


def loss():
    return float(np.sum((net.forward(x) - target) ** 2))


out, cache = net.forward_cached(x)
analytic, _ = net.backward(cache, 2.0 * (out - target))
numeric = finite_difference_gradient(loss, net.parameters, h=1e-5)

worst = max(
    float(np.max(np.abs(a - n) / np.maximum(np.abs(n), 1e-8)))
    for a, n in zip(analytic, numeric)
)
print(f"worst relative gradient error over {sum(p.size for p in net.parameters)} "
      f"parameters: {worst:.2e}")

print("\ntraining the net on the fixed batch with Adam:")
opt = Adam(net.parameters, lr=1e-2)
for step in range(501):
    out, cache = net.forward_cached(x)
    grads, _ = net.backward(cache, 2.0 * (out - target))
    opt.step(net.parameters, grads)
    if step % 100 == 0:
        print(f"  step {step:4d}: loss {loss():9.5f}")
