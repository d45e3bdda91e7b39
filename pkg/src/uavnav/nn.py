"""Small dense networks with hand-written backprop, Adam, and a diagonal Gaussian head.

Inputs are batched row-wise: shape (batch, features).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

LOG_2PI = math.log(2.0 * math.pi)

_ACTIVATIONS = {
    "tanh": (np.tanh, lambda y: 1.0 - y * y),
    "identity": (lambda x: x, lambda y: np.ones_like(y)),
}


def orthogonal(shape, gain: float, rng: np.random.Generator) -> np.ndarray:
    rows, cols = shape
    a = rng.standard_normal((max(rows, cols), min(rows, cols)))
    q, r = np.linalg.qr(a)
    q = q * np.sign(np.diag(r))
    if rows < cols:
        q = q.T
    return gain * q[:rows, :cols]


class Mlp:
    """Fully connected net: tanh hidden layers, configurable output activation.

    Weight matrices are stored (fan_in, fan_out) so a layer is ``x @ W + b``.
    """

    def __init__(self, sizes, output_activation: str = "identity", dtype=np.float32,
                 rng: np.random.Generator | None = None, output_gain: float = 1.0,
                 hidden_gain: float = math.sqrt(2.0)):
        if len(sizes) < 2:
            raise ValueError("need at least input and output sizes")
        if output_activation not in _ACTIVATIONS:
            raise ValueError(f"unknown activation {output_activation!r}")
        self.sizes = [int(s) for s in sizes]
        self.hidden_activation = "tanh"
        self.output_activation = output_activation
        self.dtype = np.dtype(dtype)
        self.weights = []
        self.biases = []
        n_layers = len(self.sizes) - 1
        for i, (m, n) in enumerate(zip(self.sizes[:-1], self.sizes[1:])):
            gain = output_gain if i == n_layers - 1 else hidden_gain
            if rng is None:
                w = np.zeros((m, n))
            else:
                w = orthogonal((m, n), gain, rng)
            self.weights.append(w.astype(self.dtype))
            self.biases.append(np.zeros(n, dtype=self.dtype))

    @property
    def params(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out

    def forward(self, x: np.ndarray) -> tuple[np.ndarray, list]:
        """Returns (output, cache). `cache` holds each layer's input and output."""
        x = np.asarray(x, dtype=self.dtype)
        if x.ndim == 1:
            x = x[None, :]
        if x.shape[1] != self.sizes[0]:
            raise ValueError(f"input has {x.shape[1]} features, net expects {self.sizes[0]}")
        cache = []
        h = x
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            act = self.output_activation if i == last else self.hidden_activation
            y = _ACTIVATIONS[act][0](h @ w + b)
            cache.append((h, y))
            h = y
        return h, cache

    def __call__(self, x):
        return self.forward(x)[0]

    def backward(self, cache, grad_out: np.ndarray) -> list[np.ndarray]:
        """Gradients w.r.t. ``params`` given dLoss/dOutput for the cached batch."""
        if not cache:
            raise ValueError("backward() needs the cache from forward()")
        grads = [None] * (2 * len(self.weights))
        g = np.asarray(grad_out, dtype=self.dtype).reshape(cache[-1][1].shape)
        last = len(self.weights) - 1
        for i in range(last, -1, -1):
            h, y = cache[i]
            act = self.output_activation if i == last else self.hidden_activation
            gz = g * _ACTIVATIONS[act][1](y)
            grads[2 * i] = h.T @ gz
            grads[2 * i + 1] = gz.sum(axis=0)
            if i > 0:
                g = gz @ self.weights[i].T
        return grads


def flatten(arrays) -> np.ndarray:
    return np.concatenate([np.ravel(a) for a in arrays])


def unflatten_into(vec: np.ndarray, arrays) -> None:
    i = 0
    for a in arrays:
        a[...] = vec[i:i + a.size].reshape(a.shape)
        i += a.size


class NonFiniteGradientError(FloatingPointError):
    pass


@dataclass
class Adam:
    lr: float = 3e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)

    def step(self, params, grads) -> None:
        """In-place Adam update with bias correction."""
        if len(params) != len(grads):
            raise ValueError("params/grads length mismatch")
        for p, g in zip(params, grads):
            if p.shape != g.shape:
                raise ValueError(f"shape mismatch {p.shape} vs {g.shape}")
            if not np.all(np.isfinite(g)):
                raise NonFiniteGradientError("non-finite gradient; update skipped")
        if not self.m:
            self.m = [np.zeros_like(p) for p in params]
            self.v = [np.zeros_like(p) for p in params]
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= (self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)).astype(p.dtype)


def gaussian_log_prob(mean, log_std, action) -> np.ndarray:
    """Diagonal Gaussian log-density, summed over the last axis."""
    mean = np.asarray(mean)
    log_std = np.asarray(log_std)
    z = (np.asarray(action) - mean) * np.exp(-log_std)
    return -0.5 * np.sum(z * z, axis=-1) - np.sum(log_std) - 0.5 * mean.shape[-1] * LOG_2PI


def gaussian_entropy(log_std) -> float:
    log_std = np.asarray(log_std)
    return float(np.sum(log_std) + 0.5 * log_std.size * (1.0 + LOG_2PI))


def sample(mean, log_std, rng: np.random.Generator) -> np.ndarray:
    mean = np.asarray(mean)
    return mean + np.exp(log_std) * rng.standard_normal(mean.shape).astype(mean.dtype)
