"""Assembly and verification of the Gram-matrix performance-estimation SDP.

The program has two PSD unknowns of order ``2T + 6``: ``Gx`` (inner products
of the x-side vectors) and ``Gy`` (the y side).  Every constraint is linear in
``(Gx, Gy)`` and is stored as rows of sparse operators acting on ``vec(G)``
(row-major), so that ``<M, G> = row @ vec(G)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .basis import PepSpec, SelectionBasis, build_selection_basis

#: Acceptance tolerances for a returned solution.
CERT_TOL = 1e-6


def sym(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Symmetrized outer product ``(a b^T + b a^T) / 2``."""
    o = np.outer(a, b)
    return 0.5 * (o + o.T)


@dataclass(frozen=True, eq=False)
class PsdMap:
    """Linear map ``(Gx, Gy) -> M`` of order ``k`` whose image must be PSD."""

    order: int
    Mx: sp.csr_matrix
    My: sp.csr_matrix
    label: str

    def apply(self, gx: np.ndarray, gy: np.ndarray) -> np.ndarray:
        m = (self.Mx @ gx.ravel() + self.My @ gy.ravel()).reshape(self.order, self.order)
        return 0.5 * (m + m.T)


@dataclass(frozen=True, eq=False)
class SdpInstance:
    """``maximize <Cx, Gx> + <Cy, Gy>`` subject to linear and PSD constraints."""

    spec: PepSpec
    gram_order: int
    ineq_x: sp.csr_matrix
    ineq_y: sp.csr_matrix
    ineq_rhs: np.ndarray
    ineq_labels: list
    eq_x: sp.csr_matrix
    eq_y: sp.csr_matrix
    eq_rhs: np.ndarray
    eq_labels: list
    obj_x: np.ndarray
    obj_y: np.ndarray
    psd_maps: list = field(default_factory=list)

    @property
    def gram_orders(self):
        return (self.gram_order, self.gram_order)

    @property
    def n_ineq(self) -> int:
        return self.ineq_x.shape[0]

    @property
    def n_eq(self) -> int:
        return self.eq_x.shape[0]

    def constraints(self):
        """Iterate ``(Mx, My, rhs, sense, label)`` with dense symmetric matrices."""
        N = self.gram_order
        for Ax, Ay, rhs, labels, sense in ((self.ineq_x, self.ineq_y, self.ineq_rhs, self.ineq_labels, "<="),
                                           (self.eq_x, self.eq_y, self.eq_rhs, self.eq_labels, "==")):
            for k in range(Ax.shape[0]):
                yield (Ax[k].toarray().reshape(N, N), Ay[k].toarray().reshape(N, N),
                       float(rhs[k]), sense, labels[k])

    def objective(self, gx: np.ndarray, gy: np.ndarray) -> float:
        return float(self.obj_x @ gx.ravel() + self.obj_y @ gy.ravel())


class _Rows:
    def __init__(self, N):
        self.N = N
        self.rx, self.ry, self.rhs, self.labels = [], [], [], []

    def add(self, mx, my, rhs, label):
        self.rx.append(sp.csr_matrix(mx.reshape(1, -1)) if mx is not None else None)
        self.ry.append(sp.csr_matrix(my.reshape(1, -1)) if my is not None else None)
        self.rhs.append(rhs)
        self.labels.append(label)

    def stack(self):
        n2 = self.N * self.N
        empty = sp.csr_matrix((1, n2))
        rx = sp.vstack([r if r is not None else empty for r in self.rx], format="csr")
        ry = sp.vstack([r if r is not None else empty for r in self.ry], format="csr")
        return rx, ry, np.array(self.rhs, dtype=float), self.labels


def assemble_pep_sdp(spec: PepSpec) -> SdpInstance:
    """Build the worst-case SDP for ``T`` steps of the chosen dynamic.

    Objective: the averaged gap ``(1/T) sum_i (<q_{-1}, x_i> - <y_i, p_{-1}>)``
    against the comparators ``x_{-1}``, ``y_{-1}``.  Constraints, for all
    ``i, j`` in ``I_T = {-1, ..., T}``:

    * interpolation of both feasible sets: ``<g_j, x_i - x_j> <= 0``;
    * both sets lie in the unit ball: ``|x_i|^2 <= 1``;
    * one matrix couples the players: ``<x_i, q_j> = <p_i, y_j>``;
    * ``X^T Gx X - P^T Gy P`` and ``Y^T Gy Y - Q^T Gx Q`` are PSD, which
      together encode ``sigma_max(A) <= 1``.
    """
    B = build_selection_basis(spec)
    N = B.ambient_dim
    T = int(spec.T)
    idx = list(spec.indices)

    obj_x = np.zeros((N, N))
    obj_y = np.zeros((N, N))
    for i in range(1, T + 1):
        obj_x += sym(B.q(-1), B.x(i))
        obj_y -= sym(B.y(i), B.p(-1))
    obj_x /= T
    obj_y /= T

    ineq = _Rows(N)
    for side, pts, gs in (("x", B.x, B.g), ("y", B.y, B.gy)):
        for i in idx:
            for j in idx:
                m = sym(gs(j), pts(i) - pts(j))
                ineq.add(m if side == "x" else None, m if side == "y" else None, 0.0,
                         f"interp_{side}[{i},{j}]")
    for side, pts in (("x", B.x), ("y", B.y)):
        for i in idx:
            m = sym(pts(i), pts(i))
            ineq.add(m if side == "x" else None, m if side == "y" else None, 1.0, f"radius_{side}[{i}]")

    eq = _Rows(N)
    for i in idx:
        for j in idx:
            eq.add(sym(B.x(i), B.q(j)), -sym(B.p(i), B.y(j)), 0.0, f"couple[{i},{j}]")

    maps = [_psd_map(B.x, B.p, idx, "XGxX-PGyP", x_first=True),
            _psd_map(B.y, B.q, idx, "YGyY-QGxQ", x_first=False)]
    ix, iy, irhs, ilab = ineq.stack()
    ex, ey, erhs, elab = eq.stack()
    return SdpInstance(spec, N, ix, iy, irhs, ilab, ex, ey, erhs, elab,
                       obj_x.ravel(), obj_y.ravel(), maps)


def _psd_map(own, other, idx, label, x_first):
    k = len(idx)
    rows_own, rows_other = [], []
    for a in idx:
        for b in idx:
            rows_own.append(sym(own(a), own(b)).ravel())
            rows_other.append(-sym(other(a), other(b)).ravel())
    m_own = sp.csr_matrix(np.array(rows_own))
    m_other = sp.csr_matrix(np.array(rows_other))
    if x_first:
        return PsdMap(k, m_own, m_other, label)
    return PsdMap(k, m_other, m_own, label)


@dataclass(frozen=True, eq=False)
class SdpSolution:
    """Gram blocks returned by a solver together with their verification report."""

    gram_x: np.ndarray
    gram_y: np.ndarray
    objective_value: float
    max_eq_residual: float
    max_ineq_violation: float
    min_eigenvalue: float
    tol: float = CERT_TOL
    solver_objective: float = float("nan")

    @property
    def accepted(self) -> bool:
        return (self.min_eigenvalue >= -self.tol and self.max_eq_residual <= self.tol
                and self.max_ineq_violation <= self.tol)

    def summary(self) -> str:
        return (f"objective {self.objective_value:.6f}, eq residual {self.max_eq_residual:.2e}, "
                f"ineq violation {self.max_ineq_violation:.2e}, min eigenvalue {self.min_eigenvalue:.2e}")


def verify_certificate(instance: SdpInstance, gram_x, gram_y, tol: float = CERT_TOL,
                       solver_objective: float = float("nan")) -> SdpSolution:
    """Recompute every residual from the Gram blocks alone.

    The objective is evaluated from the Grams too, so nothing reported by the
    solver is trusted.
    """
    gx = np.asarray(gram_x, dtype=float)
    gy = np.asarray(gram_y, dtype=float)
    vx, vy = gx.ravel(), gy.ravel()
    ineq = instance.ineq_x @ vx + instance.ineq_y @ vy - instance.ineq_rhs
    eq = instance.eq_x @ vx + instance.eq_y @ vy - instance.eq_rhs
    eigs = [np.linalg.eigvalsh(0.5 * (gx + gx.T)).min(), np.linalg.eigvalsh(0.5 * (gy + gy.T)).min()]
    eigs += [np.linalg.eigvalsh(m.apply(gx, gy)).min() for m in instance.psd_maps]
    return SdpSolution(gx, gy, instance.objective(gx, gy),
                       float(np.abs(eq).max()) if eq.size else 0.0,
                       float(max(ineq.max(), 0.0)) if ineq.size else 0.0,
                       float(min(eigs)), tol, solver_objective)


def reduce_instance(instance: SdpInstance, drop=None):
    """Remove Gram slots that only appear in vacuous constraints.

    The subgradients ``g_{-1}`` and ``g_0`` enter only interpolation rows,
    which are satisfied by setting them to zero, so their Gram diagonals are
    unbounded in any optimal face.  Dropping them (and every row that becomes
    identically zero, including the trivial ``i = j`` rows) leaves the optimal
    value unchanged and gives the solver a strictly feasible dual.  Returns
    the reduced instance and the kept slot indices for :func:`lift_grams`.
    """
    N = instance.gram_order
    if drop is None:
        B = build_selection_basis(instance.spec)
        drop = [int(np.flatnonzero(B.g(-1))[0]), int(np.flatnonzero(B.g(0))[0])]
    keep = np.setdiff1d(np.arange(N), np.asarray(drop, dtype=int))
    sel = (keep[:, None] * N + keep[None, :]).ravel()

    def cut(M):
        return sp.csr_matrix(M)[:, sel]

    ix, iy = cut(instance.ineq_x), cut(instance.ineq_y)
    live = np.asarray(abs(ix).sum(axis=1) + abs(iy).sum(axis=1)).ravel() > 0
    maps = [PsdMap(m.order, cut(m.Mx), cut(m.My), m.label) for m in instance.psd_maps]
    reduced = SdpInstance(instance.spec, len(keep), ix[live], iy[live], instance.ineq_rhs[live],
                          [lab for lab, k in zip(instance.ineq_labels, live) if k],
                          cut(instance.eq_x), cut(instance.eq_y), instance.eq_rhs, instance.eq_labels,
                          instance.obj_x[sel], instance.obj_y[sel], maps)
    return reduced, keep


def lift_grams(gram_order: int, keep, gram_x, gram_y):
    """Embed reduced Gram blocks back into the full slot layout with zeros."""
    gx = np.zeros((gram_order, gram_order))
    gy = np.zeros((gram_order, gram_order))
    gx[np.ix_(keep, keep)] = gram_x
    gy[np.ix_(keep, keep)] = gram_y
    return gx, gy
