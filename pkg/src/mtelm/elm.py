"""Random hidden-layer feature maps and the single-task ridge solver.

A hidden layer is sampled once per experiment and shared by every task,
so all tasks regress in the same random feature space.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .errors import UsageError
from .numerics import spd_solve

ACTIVATIONS = ("sigmoid",)


@dataclass(frozen=True)
class HiddenLayer:
    """Fixed random feature map ``h(x) = g(W x + b)``.

    ``weights`` is (L, n) and ``biases`` is (L,).  The layer is never
    trained; only the linear output weights on top of it are.
    """

    weights: np.ndarray
    biases: np.ndarray
    activation: str = "sigmoid"
    seed: int | None = None

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        b = np.asarray(self.biases, dtype=float)
        if w.ndim != 2:
            raise UsageError(f"weights must be 2-dimensional, got shape {w.shape}")
        if b.shape != (w.shape[0],):
            raise UsageError(
                f"biases must have shape ({w.shape[0]},), got {b.shape}"
            )
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
            raise UsageError("hidden-layer parameters must be finite")
        if self.activation not in ACTIVATIONS:
            raise UsageError(f"unknown activation {self.activation!r}")
        w = w.copy()
        b = b.copy()
        w.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "biases", b)

    @property
    def node_count(self):
        return self.weights.shape[0]

    @property
    def input_dim(self):
        return self.weights.shape[1]


def sample_hidden_layer(input_dim, node_count, seed):
    """Draw a hidden layer: weights uniform on [-1, 1), biases on [0, 1).

    The same (input_dim, node_count, seed) triple always regenerates the
    identical layer.
    """
    if input_dim < 1 or node_count < 1:
        raise UsageError("input_dim and node_count must be positive")
    rng = np.random.default_rng(seed)
    weights = rng.uniform(-1.0, 1.0, size=(node_count, input_dim))
    biases = rng.uniform(0.0, 1.0, size=node_count)
    return HiddenLayer(weights=weights, biases=biases, seed=seed)


def feature_map(layer, x):
    """Hidden activations ``H`` with ``H[i, l] = g(w_l . x_i + b_l)``."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 2:
        raise UsageError(f"samples must be 2-dimensional, got shape {x.shape}")
    if x.shape[1] != layer.input_dim:
        raise UsageError(
            f"samples have {x.shape[1]} features, layer expects {layer.input_dim}"
        )
    return expit(x @ layer.weights.T + layer.biases)


def solve_local_elm(h, t, mu):
    """Ridge output weights ``(H^T H + mu I)^-1 H^T T`` for one task."""
    h = np.asarray(h, dtype=float)
    t = np.asarray(t, dtype=float)
    if h.ndim != 2 or t.ndim != 2 or h.shape[0] != t.shape[0]:
        raise UsageError(
            f"H and T must be 2-dimensional with matching rows, got {h.shape}, {t.shape}"
        )
    if not mu > 0:
        raise UsageError("ridge parameter mu must be positive")
    gram = h.T @ h + mu * np.eye(h.shape[1])
    return spd_solve(gram, h.T @ t)


def local_objective(h, t, beta, mu):
    """Ridge objective 0.5 ||H beta - T||^2 + mu/2 ||beta||^2."""
    return 0.5 * np.linalg.norm(h @ beta - t) ** 2 + 0.5 * mu * np.linalg.norm(beta) ** 2
