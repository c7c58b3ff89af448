"""Euclidean projections onto the simplex and its affine hull.

Also provides the decomposition of one AltGDA step into its smooth part
(projected gradients ``v``, ``u``) and its nonsmooth part (``gamma``,
``lambda``), the difference between projecting onto the affine hull and
onto the simplex itself.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._kernels import project_into
from .errors import ContractViolation, NotAnAltGDAStepError
from .game import PayoffMatrix, as_probs

#: Tolerance used when replaying a claimed AltGDA step.
REPLAY_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class ProjectionResult:
    point: np.ndarray
    tau: float
    active_set: tuple


@dataclass(frozen=True, eq=False)
class UpdateDecomposition:
    v: np.ndarray
    u: np.ndarray
    gamma: np.ndarray
    lam: np.ndarray
    gamma_bar: float
    lambda_bar: float
    tau_x: float
    tau_y: float


def project_simplex(v) -> ProjectionResult:
    """Project ``v`` onto the probability simplex by sorting.

    The result is ``max(v - tau, 0)`` for the unique threshold ``tau``.
    Coordinates landing exactly on the threshold are zero and excluded from
    the active set.
    """
    v = np.asarray(v, dtype=float).reshape(-1)
    if v.size == 0:
        raise ContractViolation("cannot project an empty vector")
    if not np.all(np.isfinite(v)):
        raise ContractViolation("cannot project a vector with non-finite entries")
    out = np.empty_like(v)
    tau = project_into(v, out)
    return ProjectionResult(out, float(tau), tuple(int(i) for i in np.flatnonzero(out > 0)))


def project_affine_hull(v) -> np.ndarray:
    """Project onto ``{z : sum(z) = 1}``."""
    v = np.asarray(v, dtype=float).reshape(-1)
    return v - (v.sum() - 1.0) / v.size


def projected_gradients(A: PayoffMatrix, x, y):
    """Gradients of both players projected onto the zero-sum subspace.

    Returns ``v = -A^T y + mean(A^T y)`` and ``u = A x - mean(A x)``.
    """
    a = A.entries
    gy = a.T @ as_probs(y)
    gx = a @ as_probs(x)
    return -gy + gy.mean(), gx - gx.mean()


def altgda_step(A: PayoffMatrix, eta: float, x, y):
    """One AltGDA step ``(x, y) -> (x+, y+)`` as plain arrays."""
    a = A.entries
    xn = project_simplex(as_probs(x) - eta * (a.T @ as_probs(y))).point
    yn = project_simplex(as_probs(y) + eta * (a @ xn)).point
    return xn, yn


def check_step(A: PayoffMatrix, eta: float, x_t, y_t, x_next, y_next, tol=REPLAY_TOL):
    """Raise unless ``(x_next, y_next)`` is one AltGDA step from ``(x_t, y_t)``."""
    xr, yr = altgda_step(A, eta, x_t, y_t)
    err = max(np.abs(xr - as_probs(x_next)).max(), np.abs(yr - as_probs(y_next)).max())
    if err > tol:
        raise NotAnAltGDAStepError(f"replayed step differs by {err:.3e} (tolerance {tol:.0e})")


def decompose_update(A: PayoffMatrix, eta: float, x_t, y_t, x_next, y_next) -> UpdateDecomposition:
    """Split one AltGDA step into smooth and nonsmooth parts.

    With ``v``, ``u`` the projected gradients at ``y^t`` and ``x^{t+1}``,
    ``gamma = (x^t + eta v - x^{t+1}) / eta`` and
    ``lam = (y^t + eta u - y^{t+1}) / eta``.  The step is replayed first; the
    decomposition is meaningless for points that are not consecutive iterates.
    """
    if not eta > 0:
        raise ContractViolation("stepsize must be positive")
    check_step(A, eta, x_t, y_t, x_next, y_next)
    x_t, y_t = as_probs(x_t), as_probs(y_t)
    x_next, y_next = as_probs(x_next), as_probs(y_next)
    v, _ = projected_gradients(A, x_t, y_t)
    _, u = projected_gradients(A, x_next, y_t)
    gamma = (x_t + eta * v - x_next) / eta
    lam = (y_t + eta * u - y_next) / eta
    tau_x = project_simplex(x_t + eta * v).tau
    tau_y = project_simplex(y_t + eta * u).tau
    return UpdateDecomposition(v, u, gamma, lam, float(gamma.max()), float(lam.max()),
                               tau_x, tau_y)
