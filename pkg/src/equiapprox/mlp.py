"""Dense tanh MLP with an explicit reverse pass.

Rows of the input matrix are independent samples; the graph is
affine -> tanh -> ... -> affine (no activation on the output logits).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np


@dataclass
class MlpParams:
    weights: list[np.ndarray]  # layer k: (fan_in, fan_out)
    biases: list[np.ndarray]

    @classmethod
    def init(cls, sizes: Sequence[int], rng: np.random.Generator, output_scale: float = 1.0) -> "MlpParams":
        """LeCun-normal weights, zero biases; last layer scaled by ``output_scale``."""
        weights, biases = [], []
        for k, (a, b) in enumerate(zip(sizes[:-1], sizes[1:])):
            w = rng.standard_normal((a, b)) / np.sqrt(a)
            if k == len(sizes) - 2:
                w *= output_scale
            weights.append(w)
            biases.append(np.zeros(b))
        return cls(weights, biases)

    @classmethod
    def zeros(cls, sizes: Sequence[int]) -> "MlpParams":
        return cls(
            [np.zeros((a, b)) for a, b in zip(sizes[:-1], sizes[1:])],
            [np.zeros(b) for b in sizes[1:]],
        )

    @property
    def sizes(self) -> list[int]:
        return [self.weights[0].shape[0]] + [w.shape[1] for w in self.weights]

    @property
    def num_params(self) -> int:
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))

    def flat(self) -> np.ndarray:
        parts = []
        for w, b in zip(self.weights, self.biases):
            parts += [w.ravel(), b]
        return np.concatenate(parts)

    @classmethod
    def from_flat(cls, sizes: Sequence[int], flat: np.ndarray) -> "MlpParams":
        flat = np.asarray(flat, dtype=float)
        weights, biases, pos = [], [], 0
        for a, b in zip(sizes[:-1], sizes[1:]):
            weights.append(flat[pos:pos + a * b].reshape(a, b).copy())
            pos += a * b
            biases.append(flat[pos:pos + b].copy())
            pos += b
        if pos != flat.size:
            raise ValueError(f"flat parameter vector has {flat.size} entries, architecture needs {pos}")
        return cls(weights, biases)

    def copy(self) -> "MlpParams":
        return MlpParams([w.copy() for w in self.weights], [b.copy() for b in self.biases])

    def axpy(self, alpha: float, other: "MlpParams") -> "MlpParams":
        """self + alpha * other."""
        return MlpParams(
            [w + alpha * ow for w, ow in zip(self.weights, other.weights)],
            [b + alpha * ob for b, ob in zip(self.biases, other.biases)],
        )

    def scale(self, alpha: float) -> "MlpParams":
        return MlpParams([alpha * w for w in self.weights], [alpha * b for b in self.biases])

    def is_finite(self) -> bool:
        return all(np.all(np.isfinite(w)) and np.all(np.isfinite(b)) for w, b in zip(self.weights, self.biases))


def mlp_forward(params: MlpParams, X: np.ndarray):
    """Return ``(logits, cache)`` for inputs ``X`` of shape (batch, fan_in)."""
    acts = [X]
    h = X
    last = len(params.weights) - 1
    for k, (w, b) in enumerate(zip(params.weights, params.biases)):
        z = h @ w + b
        h = z if k == last else np.tanh(z)
        acts.append(h)
    return h, acts


def mlp_backward(params: MlpParams, acts: list[np.ndarray], dout: np.ndarray) -> MlpParams:
    """Gradients of ``sum(dout * logits)`` w.r.t. all parameters."""
    n_layers = len(params.weights)
    gw: list[np.ndarray] = [None] * n_layers
    gb: list[np.ndarray] = [None] * n_layers
    delta = dout
    for k in reversed(range(n_layers)):
        gw[k] = acts[k].T @ delta
        gb[k] = delta.sum(axis=0)
        if k:
            # acts[k] = tanh(z_{k-1}); d tanh = 1 - tanh^2
            delta = (delta @ params.weights[k].T) * (1.0 - acts[k] ** 2)
    return MlpParams(gw, gb)
