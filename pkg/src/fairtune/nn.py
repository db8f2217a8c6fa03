"""Dense layer stack over a flat parameter vector, with manual backprop.

Used both by the neural-network classifier and by the mitigation policy, so
that one gradient routine (checked against finite differences) serves both.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_ACTIVATIONS = {
    "relu": (lambda z: np.maximum(z, 0.0), lambda z, a: (z > 0).astype(z.dtype)),
    "tanh": (np.tanh, lambda z, a: 1.0 - a * a),
}


@dataclass(frozen=True)
class DenseStack:
    """Fully connected layers ``sizes[0] -> ... -> sizes[-1]``.

    Hidden layers use ``activation``; the last layer is linear (callers apply
    their own output link). Parameters are laid out layer by layer as the
    row-major weight matrix ``(fan_in, fan_out)`` followed by the bias.
    """

    sizes: tuple[int, ...]
    activation: str = "relu"

    def __post_init__(self):
        object.__setattr__(self, "sizes", tuple(int(s) for s in self.sizes))
        if len(self.sizes) < 2 or min(self.sizes) < 1:
            raise ValueError(f"invalid layer sizes {self.sizes}")
        if self.activation not in _ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")

    @property
    def n_params(self) -> int:
        return sum(i * o + o for i, o in zip(self.sizes[:-1], self.sizes[1:]))

    def unflatten(self, theta: np.ndarray) -> list[tuple[np.ndarray, np.ndarray]]:
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (self.n_params,):
            raise ValueError(f"expected {self.n_params} parameters, got {theta.shape}")
        layers, pos = [], 0
        for fan_in, fan_out in zip(self.sizes[:-1], self.sizes[1:]):
            w = theta[pos:pos + fan_in * fan_out].reshape(fan_in, fan_out)
            pos += fan_in * fan_out
            b = theta[pos:pos + fan_out]
            pos += fan_out
            layers.append((w, b))
        return layers

    @staticmethod
    def flatten(layers) -> np.ndarray:
        return np.concatenate([np.concatenate([w.ravel(), b]) for w, b in layers])

    def weight_mask(self) -> np.ndarray:
        """Boolean mask selecting weight (non-bias) entries of theta."""
        mask = []
        for fan_in, fan_out in zip(self.sizes[:-1], self.sizes[1:]):
            mask.append(np.ones(fan_in * fan_out, bool))
            mask.append(np.zeros(fan_out, bool))
        return np.concatenate(mask)

    def init(self, rng: np.random.Generator) -> np.ndarray:
        layers = []
        for fan_in, fan_out in zip(self.sizes[:-1], self.sizes[1:]):
            bound = np.sqrt(6.0 / fan_in)
            layers.append((rng.uniform(-bound, bound, (fan_in, fan_out)), np.zeros(fan_out)))
        return self.flatten(layers)

    def forward(self, theta: np.ndarray, x: np.ndarray):
        """Return the output pre-activations and a cache for :meth:`backward`."""
        act, _ = _ACTIVATIONS[self.activation]
        layers = self.unflatten(theta)
        h = np.asarray(x, dtype=float)
        cache = [(h, None)]
        for k, (w, b) in enumerate(layers):
            z = h @ w + b
            if k == len(layers) - 1:
                return z, cache
            h = act(z)
            cache.append((h, z))
        raise AssertionError("unreachable")

    def backward(self, theta: np.ndarray, cache, grad_out: np.ndarray) -> np.ndarray:
        """Gradient of ``sum(grad_out * output)`` with respect to theta."""
        _, dact = _ACTIVATIONS[self.activation]
        layers = self.unflatten(theta)
        delta = np.asarray(grad_out, dtype=float)
        grads = []
        for k in range(len(layers) - 1, -1, -1):
            h_in, _ = cache[k]
            w, _ = layers[k]
            grads.append((h_in.T @ delta, delta.sum(axis=0)))
            if k:
                h, z = cache[k]
                delta = (delta @ w.T) * dact(z, h)
        return self.flatten(grads[::-1])
