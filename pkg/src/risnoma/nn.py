"""Minimal numpy function-approximator stack with analytic gradients.

Multilayer perceptrons with tanh hidden layers, linear or per-group-softmax
output heads, a Gaussian policy head with a learned state-independent log-std
vector, Adam, a central-finite-difference gradient checker, and a bit-exact
checkpoint format.  Everything is float64 and deterministic given the rng.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

__all__ = [
    "Mlp",
    "GaussianPolicy",
    "Adam",
    "gaussian_head_sample",
    "gaussian_log_prob",
    "finite_difference_gradient",
    "flatten_arrays",
    "unflatten_arrays",
    "save_checkpoint",
    "load_checkpoint",
    "CHECKPOINT_VERSION",
]

CHECKPOINT_VERSION = 1


class Mlp:
    """Fully connected net: tanh hidden layers, configurable output head.

    ``head`` is "linear" or "softmax"; a softmax head normalizes the output
    within each group of ``softmax_groups`` consecutive entries.  Parameters
    live in ``self.parameters`` as [W1, b1, W2, b2, ...] with W of shape
    (fan_in, fan_out); inputs are (batch, d) or (d,).
    """

    def __init__(self, layer_sizes, rng: np.random.Generator, head: str = "linear",
                 softmax_groups: int | None = None):
        if len(layer_sizes) < 2:
            raise ValueError("need at least input and output sizes")
        if head not in ("linear", "softmax"):
            raise ValueError(f"unknown head {head!r}")
        if head == "softmax":
            if not softmax_groups or layer_sizes[-1] % softmax_groups:
                raise ValueError("softmax head needs groups dividing the output size")
        self.layer_sizes = list(layer_sizes)
        self.head = head
        self.softmax_groups = softmax_groups
        self.parameters: list[np.ndarray] = []
        for fan_in, fan_out in zip(layer_sizes[:-1], layer_sizes[1:]):
            self.parameters.append(rng.standard_normal((fan_in, fan_out)) / np.sqrt(fan_in))
            self.parameters.append(np.zeros(fan_out))

    @property
    def n_layers(self) -> int:
        return len(self.layer_sizes) - 1

    def forward(self, x: np.ndarray) -> np.ndarray:
        out, _ = self.forward_cached(x)
        return out

    def forward_cached(self, x: np.ndarray):
        """Forward pass returning (output, cache) for a later backward call."""
        x = np.asarray(x, dtype=float)
        squeeze = x.ndim == 1
        a = x[None, :] if squeeze else x
        if a.shape[1] != self.layer_sizes[0]:
            raise ValueError(
                f"input width {a.shape[1]} != expected {self.layer_sizes[0]}"
            )
        acts = [a]
        for i in range(self.n_layers):
            z = acts[-1] @ self.parameters[2 * i] + self.parameters[2 * i + 1]
            acts.append(np.tanh(z) if i < self.n_layers - 1 else z)
        out = acts[-1]
        if self.head == "softmax":
            out = self._softmax(out)
        cache = (acts, out, squeeze)
        return (out[0] if squeeze else out), cache

    def _softmax(self, z: np.ndarray) -> np.ndarray:
        b, d = z.shape
        g = self.softmax_groups
        zg = z.reshape(b, g, d // g)
        zg = zg - zg.max(axis=2, keepdims=True)
        e = np.exp(zg)
        return (e / e.sum(axis=2, keepdims=True)).reshape(b, d)

    def backward(self, cache, dout: np.ndarray):
        """Gradients of a scalar loss wrt every parameter, given dL/doutput.

        Returns (grads, dinput) with grads congruent to ``self.parameters``.
        """
        acts, out, squeeze = cache
        d = np.asarray(dout, dtype=float)
        if squeeze:
            d = d[None, :]
        if d.shape != acts[-1].shape:
            raise ValueError("upstream gradient shape mismatch")
        if self.head == "softmax":
            b, width = out.shape
            g = self.softmax_groups
            y = out.reshape(b, g, width // g)
            dg = d.reshape(b, g, width // g)
            inner = (dg * y).sum(axis=2, keepdims=True)
            d = (y * (dg - inner)).reshape(b, width)
        grads = [None] * len(self.parameters)
        for i in reversed(range(self.n_layers)):
            a_prev = acts[i]
            if i < self.n_layers - 1:
                d = d * (1.0 - acts[i + 1] ** 2)  # tanh'
            grads[2 * i] = a_prev.T @ d
            grads[2 * i + 1] = d.sum(axis=0)
            d = d @ self.parameters[2 * i].T
        return grads, (d[0] if squeeze else d)

    def copy(self) -> "Mlp":
        clone = object.__new__(Mlp)
        clone.layer_sizes = list(self.layer_sizes)
        clone.head = self.head
        clone.softmax_groups = self.softmax_groups
        clone.parameters = [p.copy() for p in self.parameters]
        return clone


def gaussian_log_prob(actions: np.ndarray, mean: np.ndarray, log_std: np.ndarray) -> np.ndarray:
    """Log density of a diagonal Gaussian, summed over action dimensions."""
    z = (actions - mean) / np.exp(log_std)
    return (
        -0.5 * np.sum(z**2, axis=-1)
        - np.sum(log_std)
        - 0.5 * actions.shape[-1] * np.log(2.0 * np.pi)
    )


def gaussian_head_sample(mean: np.ndarray, log_std: np.ndarray, rng: np.random.Generator):
    """Sample an action from a diagonal Gaussian and return its log-probability."""
    noise = rng.standard_normal(mean.shape)
    action = mean + np.exp(log_std) * noise
    return action, float(gaussian_log_prob(action, mean, log_std))


class GaussianPolicy:
    """MLP producing the mean of a diagonal Gaussian; log-std is a learned
    state-independent vector.  ``self.parameters`` = MLP params + [log_std]."""

    def __init__(self, layer_sizes, rng: np.random.Generator, log_std_init: float = -0.5):
        self.mlp = Mlp(layer_sizes, rng, head="linear")
        self.log_std = np.full(layer_sizes[-1], float(log_std_init))

    @property
    def parameters(self) -> list[np.ndarray]:
        return self.mlp.parameters + [self.log_std]

    def sample(self, state: np.ndarray, rng: np.random.Generator):
        mean = self.mlp.forward(state)
        return gaussian_head_sample(mean, self.log_std, rng)

    def mean_action(self, state: np.ndarray) -> np.ndarray:
        return self.mlp.forward(state)

    def log_prob(self, states: np.ndarray, actions: np.ndarray):
        """Log-probabilities plus the cache needed by ``log_prob_backward``."""
        mean, cache = self.mlp.forward_cached(states)
        return gaussian_log_prob(actions, mean, self.log_std), (cache, mean, actions)

    def log_prob_backward(self, lp_cache, dlogp: np.ndarray):
        """Backpropagate dL/dlogp through the density into parameter space."""
        cache, mean, actions = lp_cache
        inv_var = np.exp(-2.0 * self.log_std)
        diff = actions - mean
        dmean = dlogp[:, None] * diff * inv_var
        z2 = diff**2 * inv_var
        dlog_std = (dlogp[:, None] * (z2 - 1.0)).sum(axis=0)
        grads, _ = self.mlp.backward(cache, dmean)
        return grads + [dlog_std]

    def copy(self) -> "GaussianPolicy":
        clone = object.__new__(GaussianPolicy)
        clone.mlp = self.mlp.copy()
        clone.log_std = self.log_std.copy()
        return clone


class Adam:
    """Adaptive-moment optimizer over a list of parameter arrays (in place)."""

    def __init__(self, params: list[np.ndarray], lr: float,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr = lr
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, params: list[np.ndarray], grads: list[np.ndarray]):
        self.t += 1
        correct1 = 1.0 - self.beta1**self.t
        correct2 = 1.0 - self.beta2**self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g**2
            p -= self.lr * (m / correct1) / (np.sqrt(v / correct2) + self.eps)


def flatten_arrays(arrays: list[np.ndarray]) -> np.ndarray:
    return np.concatenate([a.ravel() for a in arrays])


def unflatten_arrays(flat: np.ndarray, like: list[np.ndarray]) -> list[np.ndarray]:
    out, i = [], 0
    for a in like:
        out.append(flat[i : i + a.size].reshape(a.shape))
        i += a.size
    return out


def finite_difference_gradient(loss_fn, arrays: list[np.ndarray], h: float = 1e-5):
    """Central-difference gradient of ``loss_fn()`` wrt every array entry.

    ``loss_fn`` must read the (mutated in place) arrays on each call.  Slow by
    design; this is the independent oracle for the analytic backward passes.
    """
    grads = [np.zeros_like(a) for a in arrays]
    for a, g in zip(arrays, grads):
        flat_a, flat_g = a.ravel(), g.ravel()
        for i in range(flat_a.size):
            orig = flat_a[i]
            flat_a[i] = orig + h
            up = loss_fn()
            flat_a[i] = orig - h
            down = loss_fn()
            flat_a[i] = orig
            flat_g[i] = (up - down) / (2.0 * h)
    return grads


def save_checkpoint(path, arrays: dict[str, np.ndarray], meta: dict):
    """Write a versioned checkpoint: raw arrays (npz) plus JSON metadata."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    np.savez(path / "arrays.npz", **arrays)
    payload = {"version": CHECKPOINT_VERSION, "meta": meta}
    (path / "meta.json").write_text(json.dumps(payload, indent=2, sort_keys=True))


def load_checkpoint(path):
    """Load a checkpoint; round-trips arrays bit-exactly."""
    path = Path(path)
    payload = json.loads((path / "meta.json").read_text())
    if payload.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {payload.get('version')}")
    with np.load(path / "arrays.npz") as data:
        arrays = {k: data[k].copy() for k in data.files}
    return arrays, payload["meta"]
