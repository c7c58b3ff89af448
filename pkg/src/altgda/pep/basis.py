"""Selection vectors for the Gram lifting of AltGDA and SimGDA.

Every quantity of a ``T``-step run is written as a fixed linear combination
of ``2T + 6`` unknown vectors per player:

* ``x_tilde[-1]`` (the comparator) and ``x_tilde[0]`` (the start),
* ``g_bar[i]`` for ``i = -1..T``, elements of the normal cone at ``x_i``,
* ``q_bar[i]`` for ``i = -1..T``, the gradients ``A^T y_i``.

Index ``i`` of the lifted space maps to ``e_{i+4}`` for ``g_bar`` and
``e_{i+T+6}`` for ``q_bar`` (1-based, so the 0-based position is one less).
The y player uses the same layout with ``p_bar[i] = A x_i``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigurationError

ALGORITHMS = ("altgda", "simgda")


@dataclass(frozen=True)
class PepSpec:
    algorithm: str
    T: int
    eta: float

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ConfigurationError(f"unknown algorithm {self.algorithm!r}")
        if int(self.T) < 1:
            raise ConfigurationError("T must be at least 1")
        if not (np.isfinite(self.eta) and self.eta >= 0):
            raise ConfigurationError("eta must be finite and nonnegative")

    @property
    def indices(self):
        return range(-1, int(self.T) + 1)


@dataclass(frozen=True, eq=False)
class SelectionBasis:
    """Coefficient vectors in the lifted space, stored as columns over ``I_T``.

    Column ``k`` of each matrix corresponds to index ``i = k - 1``.
    """

    spec: PepSpec
    ambient_dim: int
    x_tilde: np.ndarray
    y_tilde: np.ndarray
    g_x: np.ndarray
    g_y: np.ndarray
    q_bar: np.ndarray
    p_bar: np.ndarray

    def col(self, i: int) -> int:
        return i + 1

    def x(self, i):
        return self.x_tilde[:, i + 1]

    def y(self, i):
        return self.y_tilde[:, i + 1]

    def g(self, i):
        return self.g_x[:, i + 1]

    def gy(self, i):
        return self.g_y[:, i + 1]

    def q(self, i):
        return self.q_bar[:, i + 1]

    def p(self, i):
        return self.p_bar[:, i + 1]


def build_selection_basis(spec: PepSpec) -> SelectionBasis:
    """Closed-form span representation of a ``T``-step run.

    AltGDA: ``x_i = x_0 - sum_{j=1..i} g_j - eta sum_{j=0..i-1} q_j`` and
    ``y_i = y_0 - sum_{j=1..i} g_j + eta sum_{j=1..i} p_j``.  SimGDA shifts the
    ``p`` sum to ``j = 0..i-1`` because the ascent step sees ``x_{i-1}``.
    """
    T = int(spec.T)
    N = 2 * T + 6
    eye = np.eye(N)
    cols = T + 2
    g = np.stack([eye[i + 3] for i in range(-1, T + 1)], axis=1)
    q = np.stack([eye[i + T + 5] for i in range(-1, T + 1)], axis=1)
    X = np.zeros((N, cols))
    Y = np.zeros((N, cols))
    X[:, 0] = Y[:, 0] = eye[0]
    X[:, 1] = Y[:, 1] = eye[1]
    shift = 1 if spec.algorithm == "altgda" else 0
    for i in range(1, T + 1):
        X[:, i + 1] = eye[1] - g[:, 2:i + 2].sum(axis=1) - spec.eta * q[:, 1:i + 1].sum(axis=1)
        Y[:, i + 1] = (eye[1] - g[:, 2:i + 2].sum(axis=1)
                       + spec.eta * q[:, 1 + shift:i + 1 + shift].sum(axis=1))
    return SelectionBasis(spec, N, X, Y, g, g.copy(), q, q.copy())
