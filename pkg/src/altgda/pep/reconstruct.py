"""Recover a concrete worst-case game from Gram matrices and replay it.

The feasible sets of the recovered game are the convex hulls of the
recovered points, which is exactly what the interpolation constraints
certify.  A replay of the dynamic on that game must land on the recovered
iterates; otherwise :class:`ReconstructionFailed` reports the first step
that diverged.

:func:`gram_from_run` goes the other way: it lifts an actual run on a
simplex game into Gram matrices, which gives feasible points of the SDP
with a known objective.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from ..errors import ReconstructionFailed
from ..game import PayoffMatrix
from ..projections import project_simplex
from .basis import PepSpec, build_selection_basis

EIG_CLIP = 1e-6
ITERATE_TOL = 1e-4
OBJECTIVE_TOL = 1e-3


@dataclass(eq=False)
class WorstCase:
    """Recovered vectors (one column per index ``-1..T``) and the matrix ``A``."""

    spec: PepSpec
    A: PayoffMatrix
    x_points: np.ndarray
    y_points: np.ndarray
    g_x: np.ndarray
    g_y: np.ndarray
    q: np.ndarray
    p: np.ndarray
    replay_x: np.ndarray
    replay_y: np.ndarray
    replay_objective: float
    max_iterate_error: float

    @property
    def x_star(self):
        return self.x_points[:, 0]

    @property
    def y_star(self):
        return self.y_points[:, 0]


def factor_gram(G: np.ndarray, clip: float = EIG_CLIP) -> np.ndarray:
    """``H`` with ``H^T H = G``, dropping numerically zero directions."""
    G = 0.5 * (np.asarray(G, dtype=float) + np.asarray(G, dtype=float).T)
    w, V = np.linalg.eigh(G)
    if w.min() < -clip:
        raise ReconstructionFailed(f"Gram matrix has eigenvalue {w.min():.3e} below -{clip:g}")
    keep = w > max(1e-12, 1e-10 * max(w.max(), 0.0))
    if not np.any(keep):
        return np.zeros((1, G.shape[0]))
    return np.sqrt(w[keep])[:, None] * V[:, keep].T


def fit_matrix(X, P, Y, Q) -> np.ndarray:
    """Least-squares ``A`` with ``A X ~ P`` and ``A^T Y ~ Q``, then ``sigma_max <= 1``.

    The normal equations ``A (X X^T) + (Y Y^T) A = P X^T + Y Q^T`` decouple in
    the eigenbases of both Gram factors.  Directions with no data get zero
    (minimum-norm solution).
    """
    a, U = np.linalg.eigh(X @ X.T)
    b, V = np.linalg.eigh(Y @ Y.T)
    R = V.T @ (P @ X.T + Y @ Q.T) @ U
    den = b[:, None] + a[None, :]
    scale = max(den.max(), 1e-300)
    At = np.where(den > 1e-12 * scale, R / np.where(den > 0, den, 1.0), 0.0)
    A = V @ At @ U.T
    u, s, vt = np.linalg.svd(A, full_matrices=False)
    return (u * np.minimum(s, 1.0)) @ vt


def project_hull(points: np.ndarray, z: np.ndarray) -> np.ndarray:
    """Euclidean projection of ``z`` onto the convex hull of the columns of ``points``."""
    import clarabel

    k = points.shape[1]
    if k == 1:
        return points[:, 0].copy()
    P = sp.csc_matrix(np.triu(points.T @ points))
    q = -(points.T @ z)
    A = sp.csc_matrix(np.vstack([np.ones((1, k)), -np.eye(k)]))
    b = np.concatenate([[1.0], np.zeros(k)])
    settings = clarabel.DefaultSettings()
    settings.verbose = False
    settings.tol_gap_abs = settings.tol_gap_rel = settings.tol_feas = 1e-10
    sol = clarabel.DefaultSolver(P, q, A, b, [clarabel.ZeroConeT(1), clarabel.NonnegativeConeT(k)],
                                 settings).solve()
    lam = np.maximum(np.asarray(sol.x), 0.0)
    lam /= lam.sum()
    return points @ lam


def reconstruct_worst_case(spec: PepSpec, gram_x, gram_y, objective_value=None,
                           iterate_tol: float = ITERATE_TOL, objective_tol: float = OBJECTIVE_TOL) -> WorstCase:
    """Factor both Grams, fit ``A`` and replay the dynamic on the hulls.

    Raises :class:`ReconstructionFailed` when an iterate moves more than
    ``iterate_tol`` away from its recovered value, or when the replayed
    averaged gap misses ``objective_value`` by more than ``objective_tol``.
    """
    B = build_selection_basis(spec)
    Hx, Hy = factor_gram(gram_x), factor_gram(gram_y)
    X, Y = Hx @ B.x_tilde, Hy @ B.y_tilde
    Gx, Gy = Hx @ B.g_x, Hy @ B.g_y
    Q, P = Hx @ B.q_bar, Hy @ B.p_bar
    A = fit_matrix(X, P, Y, Q)
    T, eta = int(spec.T), float(spec.eta)
    rx, ry = np.empty_like(X), np.empty_like(Y)
    rx[:, :2], ry[:, :2] = X[:, :2], Y[:, :2]
    worst = 0.0
    for t in range(1, T + 1):
        xp, yp = rx[:, t], ry[:, t]
        xn = project_hull(X, xp - eta * (A.T @ yp))
        grad = A @ (xn if spec.algorithm == "altgda" else xp)
        yn = project_hull(Y, yp + eta * grad)
        rx[:, t + 1], ry[:, t + 1] = xn, yn
        err = max(np.abs(xn - X[:, t + 1]).max(), np.abs(yn - Y[:, t + 1]).max())
        worst = max(worst, err)
        if err > iterate_tol:
            raise ReconstructionFailed(f"replay diverged at step {t} by {err:.3e}", step=t)
    xs, ys = X[:, 0], Y[:, 0]
    obj = float(np.mean([(A.T @ ys) @ rx[:, t + 1] - ry[:, t + 1] @ (A @ xs) for t in range(1, T + 1)]))
    if objective_value is not None and abs(obj - objective_value) > objective_tol:
        raise ReconstructionFailed(
            f"replayed objective {obj:.6f} differs from {objective_value:.6f}", step=T)
    return WorstCase(spec, PayoffMatrix(A), X, Y, Gx, Gy, Q, P, rx, ry, obj, worst)


def gram_from_run(A: PayoffMatrix, spec: PepSpec, x0, y0, x_star=None, y_star=None):
    """Gram matrices of an actual run on a simplex game.

    Requires ``sigma_max(A) <= 1`` for the result to be feasible.  With no
    comparators given, the best responses to the averaged iterates are used,
    so the objective equals the duality gap of the averages.  Returns
    ``(gram_x, gram_y, xs, ys)`` with the iterates ``x^0..x^T``.
    """
    a = A.entries
    T, eta = int(spec.T), float(spec.eta)
    xs = [np.asarray(x0, dtype=float)]
    ys = [np.asarray(y0, dtype=float)]
    gxs, gys = [], []
    for _ in range(T):
        x, y = xs[-1], ys[-1]
        z = x - eta * (a.T @ y)
        xn = project_simplex(z).point
        w = y + eta * (a @ (xn if spec.algorithm == "altgda" else x))
        yn = project_simplex(w).point
        gxs.append(z - xn)
        gys.append(w - yn)
        xs.append(xn)
        ys.append(yn)
    xs, ys = np.array(xs), np.array(ys)
    xbar, ybar = xs[1:].mean(axis=0), ys[1:].mean(axis=0)
    if x_star is None:
        x_star = np.eye(A.n)[np.argmin(a.T @ ybar)]
    if y_star is None:
        y_star = np.eye(A.m)[np.argmax(a @ xbar)]
    N = 2 * T + 6
    Hx, Hy = np.zeros((A.n, N)), np.zeros((A.m, N))
    Hx[:, 0], Hx[:, 1] = x_star, xs[0]
    Hy[:, 0], Hy[:, 1] = y_star, ys[0]
    for i in range(1, T + 1):
        Hx[:, i + 3] = gxs[i - 1]
        Hy[:, i + 3] = gys[i - 1]
    Hx[:, T + 4] = a.T @ y_star
    Hy[:, T + 4] = a @ x_star
    for i in range(0, T + 1):
        Hx[:, i + T + 5] = a.T @ ys[i]
        Hy[:, i + T + 5] = a @ xs[i]
    return Hx.T @ Hx, Hy.T @ Hy, xs, ys
