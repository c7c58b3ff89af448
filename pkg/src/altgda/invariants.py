"""Runtime checkers for the inequalities and identities behind the rates.

Each checker evaluates one statement on a stored AltGDA trajectory and
returns an :class:`InvariantResult`.  ``worst_slack`` is the smallest value of
``rhs - lhs`` over every checked instance (for identities: minus the largest
absolute error), so a check passes when ``worst_slack >= -tol``.  Checkers
whose preconditions do not hold return ``asserted=False`` and always pass.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from ._kernels import batch_thresholds
from .dynamics import (LEMMA_TOL, IterateTrace, in_local_regime, interior_stepsize_bound,
                       local_regions, theorem_bound, _membership_rows, _rowdot)
from .game import EquilibriumProfile, PayoffMatrix
from .projections import project_affine_hull, project_simplex

#: Tolerance for the projection-level identities.
PROJ_TOL = 1e-10


@dataclass(frozen=True)
class InvariantResult:
    name: str
    asserted: bool
    passed: bool
    worst_slack: float
    n_checked: int
    note: str = ""

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        if not self.asserted:
            status = "SKIP"
        return f"{status} {self.name}: worst slack {self.worst_slack:.3e} over {self.n_checked} checks {self.note}".rstrip()


def _result(name, slack, tol, note=""):
    slack = np.asarray(slack, dtype=float).reshape(-1)
    worst = float(slack.min()) if slack.size else float("inf")
    return InvariantResult(name, True, bool(worst >= -tol), worst, int(slack.size), note)


def _skip(name, note):
    return InvariantResult(name, False, True, float("inf"), 0, note)


def _probe_simplex(rng, size, d):
    """Random simplex points, half near faces (Dirichlet 0.1), half uniform."""
    k = size // 2
    a = rng.dirichlet(np.ones(d), size=size - k)
    b = rng.dirichlet(np.full(d, 0.1), size=k)
    return np.vstack([a, b])


class StepData:
    """Per-step quantities of a stored AltGDA trajectory, computed once."""

    def __init__(self, A: PayoffMatrix, trace: IterateTrace, profile: Optional[EquilibriumProfile] = None):
        if trace.xs is None:
            raise ValueError("invariant checks need a trace with stored iterates")
        if trace.config.algorithm != "altgda":
            raise ValueError("invariant checks apply to AltGDA trajectories")
        a = A.entries
        eta = float(trace.config.eta)
        self.A, self.a, self.eta, self.trace = A, a, eta, trace
        self.profile = profile if profile is not None else trace.config.reference
        self.xs, self.ys = trace.xs, trace.ys
        self.XP, self.X = self.xs[:-1], self.xs[1:]
        self.YP, self.Y = self.ys[:-1], self.ys[1:]
        gy = self.YP @ a
        gx = self.X @ a.T
        self.gy, self.gx = gy, gx
        self.v = -gy + gy.mean(axis=1, keepdims=True)
        self.u = gx - gx.mean(axis=1, keepdims=True)
        self.gamma = (self.XP + eta * self.v - self.X) / eta
        self.lam = (self.YP + eta * self.u - self.Y) / eta
        self.gamma_bar = self.gamma.max(axis=1)
        self.lambda_bar = self.lam.max(axis=1)
        self.tau_x = batch_thresholds(np.ascontiguousarray(self.XP + eta * self.v))
        self.tau_y = batch_thresholds(np.ascontiguousarray(self.YP + eta * self.u))
        dx, dy = self.X - self.XP, self.Y - self.YP
        self.dx, self.dy = dx, dy
        self.residual = _rowdot(-eta * gy - dx, dx) + _rowdot(eta * gx - dy, dy)
        if self.profile is not None:
            xs_, ys_ = self.profile.x_star.probs, self.profile.y_star.probs
            ex, ey = self.xs - xs_, self.ys - ys_
            self.E = _rowdot(ex, ex) + _rowdot(ey, ey) - eta * _rowdot(self.ys, self.xs @ a.T)
            self.V = _rowdot(ex, ex) + _rowdot(ey, ey) - eta * _rowdot(ey, ex @ a.T)

    @property
    def steps(self) -> int:
        return self.X.shape[0]


def check_simplex_elementary(A: PayoffMatrix, rng, n_probes: int = 10_000):
    """Elementary bounds for simplex points: distances, payoffs, gradients."""
    a, na = A.entries, A.spectral_norm
    x, x2 = _probe_simplex(rng, n_probes, A.n), _probe_simplex(rng, n_probes, A.n)
    y, y2 = _probe_simplex(rng, n_probes, A.m), _probe_simplex(rng, n_probes, A.m)
    tol = 1e-12 * max(1.0, na)
    return [
        _result("simplex: |x - x'| <= 2", 2.0 - np.linalg.norm(x - x2, axis=1), tol),
        _result("simplex: y^T A x <= |A|", na - _rowdot(y, x @ a.T), tol),
        _result("simplex: |A^T y| <= |A|", na - np.linalg.norm(y @ a, axis=1), tol),
        _result("simplex: (y-y')^T A (x-x') <= 4|A|",
                4 * na - _rowdot(y - y2, (x - x2) @ a.T), tol),
    ]


def check_projection_properties(rng, n_vectors: int = 10_000, dmax: int = 10):
    """Projection through the affine hull, and nonexpansiveness."""
    hull, nonexp = [], []
    for _ in range(n_vectors):
        d = int(rng.integers(1, dmax + 1))
        p = rng.normal(scale=2.0, size=d)
        q = p + rng.normal(scale=0.5, size=d)
        direct = project_simplex(p).point
        via = project_simplex(project_affine_hull(p)).point
        hull.append(-np.abs(direct - via).max())
        nonexp.append(np.linalg.norm(p - q) - np.linalg.norm(direct - project_simplex(q).point))
    return [_result("projection: P(y) == P(P_hull(y))", hull, PROJ_TOL),
            _result("projection: nonexpansive", nonexp, PROJ_TOL)]


def check_nonsmooth_terms(sd: StepData):
    """gamma_i = gamma_bar >= 0 on the next support; gamma_i <= 0 implies |gamma_i| <= |v_i|."""
    slacks = []
    for G, gb, V, Z in ((sd.gamma, sd.gamma_bar, sd.v, sd.X), (sd.lam, sd.lambda_bar, sd.u, sd.Y)):
        active = Z > 0
        slacks.append(-np.abs(np.where(active, G - gb[:, None], 0.0)).max(axis=1))
        slacks.append(gb)
        neg = G <= 0
        slacks.append(np.where(neg, np.abs(V) - np.abs(G), np.inf).min(axis=1))
    return _result("nonsmooth terms: equal on support, bounded off support",
                   np.concatenate(slacks), PROJ_TOL)


def check_tau_identity(sd: StepData):
    """eta * gamma_bar equals the projection threshold (and likewise for lambda)."""
    err = np.concatenate([np.abs(sd.eta * sd.gamma_bar - sd.tau_x),
                          np.abs(sd.eta * sd.lambda_bar - sd.tau_y)])
    return _result("threshold identity: eta*gamma_bar == tau", -err, PROJ_TOL)


def check_pos_qtt(sd: StepData, rng, probes: int = 100):
    """<gamma^t, x^{t+1} - x> >= 0 and <lambda^t, y^{t+1} - y> >= 0 at simplex probes."""
    px = _probe_simplex(rng, probes, sd.A.n)
    py = _probe_simplex(rng, probes, sd.A.m)
    sx = _rowdot(sd.gamma, sd.X)[:, None] - sd.gamma @ px.T
    sy = _rowdot(sd.lam, sd.Y)[:, None] - sd.lam @ py.T
    return _result("nonsmooth terms: <gamma, x+ - x> >= 0", np.concatenate([sx.ravel(), sy.ravel()]),
                   PROJ_TOL)


def check_residual_nonnegative(sd: StepData):
    return _result("residual r_t >= 0", sd.residual, PROJ_TOL)


def check_descent_inequalities(sd: StepData, rng, probes: int = 100, tol: float = LEMMA_TOL,
                               max_steps: Optional[int] = None):
    """Both two-step descent inequalities at random probes ``(x, y)``.

    Returns two results, one per inequality.  Probes are drawn afresh for
    every step.
    """
    a, eta = sd.a, sd.eta
    xs, ys = sd.xs, sd.ys
    T = sd.steps if max_steps is None else min(sd.steps, max_steps)
    s1, s2 = [], []
    for t in range(T):
        px = _probe_simplex(rng, probes, sd.A.n)
        py = _probe_simplex(rng, probes, sd.A.m)
        Apx = px @ a.T
        dx, dy = sd.dx[t], sd.dy[t]
        quad = 0.5 * dx @ dx + 0.5 * dy @ dy

        def phi(k):
            ex, ey = xs[k] - px, ys[k] - py
            return 0.5 * _rowdot(ex, ex) + 0.5 * _rowdot(ey, ey) + eta * Apx @ ys[k]

        lhs1 = eta * (py @ (a @ xs[t + 1]) - Apx @ ys[t + 1])
        rhs1 = phi(t) - phi(t + 1) + eta * (a @ xs[t + 1]) @ dy - quad
        s1.append(rhs1 - lhs1)
        if t >= 1:
            def psi(k):
                ex, ey = xs[k] - px, ys[k - 1] - py
                d = ys[k] - ys[k - 1]
                return 0.5 * _rowdot(ex, ex) + 0.5 * _rowdot(ey, ey) - 0.5 * d @ d

            lhs2 = eta * (py @ (a @ xs[t]) - Apx @ ys[t])
            rhs2 = psi(t) - psi(t + 1) + eta * (-(a.T @ ys[t])) @ dx - quad
            s2.append(rhs2 - lhs2)
    return (_result("descent inequality (phi, t >= 0)", np.concatenate(s1) if s1 else [], tol),
            _result("descent inequality (psi, t >= 1)", np.concatenate(s2) if s2 else [], tol))


def _interior_regime(sd: StepData):
    p = sd.profile
    return p is not None and p.is_interior and sd.eta <= interior_stepsize_bound(sd.A, p) * (1 + 1e-12)


def check_energy_decay(sd: StepData, tol: float = LEMMA_TOL):
    name = "energy decay E_{t+1} <= E_t"
    if not _interior_regime(sd):
        return _skip(name, "(needs an interior equilibrium and eta below the interior bound)")
    return _result(name, sd.E[:-1] - sd.E[1:], tol)


def check_decay_identity(sd: StepData, tol: float = LEMMA_TOL):
    """E_t - E_{t+1} = eta<gamma, x+ + x - 2x*> + eta<lambda, y+ + y - 2y*> for interior equilibria."""
    name = "energy decay identity"
    p = sd.profile
    if p is None or not p.is_interior:
        return _skip(name, "(needs an interior equilibrium)")
    xs_, ys_ = p.x_star.probs, p.y_star.probs
    rhs = sd.eta * (_rowdot(sd.gamma, sd.X + sd.XP - 2 * xs_) + _rowdot(sd.lam, sd.Y + sd.YP - 2 * ys_))
    return _result(name, -np.abs((sd.E[:-1] - sd.E[1:]) - rhs), tol)


def check_residual_sandwich(sd: StepData, tol: float = LEMMA_TOL):
    name = "residual sandwich 0 <= r_t <= E_t - E_{t+1}"
    if not _interior_regime(sd):
        return _skip(name, "(needs an interior equilibrium and eta below the interior bound)")
    upper = (sd.E[:-1] - sd.E[1:]) - sd.residual
    return _result(name, np.concatenate([sd.residual + (tol - PROJ_TOL), upper]), tol)


def check_inner_product_identity(sd: StepData, tol: float = LEMMA_TOL):
    """<gamma, x^t - x*> equals the sum over coordinates outside the next support."""
    name = "inner-product identity off the next support"
    p = sd.profile
    if p is None:
        return _skip(name, "(needs a reference equilibrium)")
    errs = []
    for G, gb, Z, ZP, star in ((sd.gamma, sd.gamma_bar, sd.X, sd.XP, p.x_star.probs),
                               (sd.lam, sd.lambda_bar, sd.Y, sd.YP, p.y_star.probs)):
        lhs = _rowdot(G, ZP - star)
        rhs = np.where(Z > 0, 0.0, (G - gb[:, None]) * (ZP - star)).sum(axis=1)
        errs.append(np.abs(lhs - rhs))
    return _result(name, -np.concatenate(errs), tol)


def _refined_rhs(sd: StepData):
    p = sd.profile
    return -sd.eta * (_rowdot(sd.gamma, sd.XP - p.x_star.probs) + _rowdot(sd.lam, sd.YP - p.y_star.probs))


def check_refined_energy_change(sd: StepData, tol: float = LEMMA_TOL):
    name = "variant energy change V_{t+1} - V_t <= -eta<gamma, x-x*> - eta<lambda, y-y*>"
    if sd.profile is None:
        return _skip(name, "(needs a reference equilibrium)")
    return _result(name, _refined_rhs(sd) - (sd.V[1:] - sd.V[:-1]), tol)


def _local_context(sd: StepData):
    p = sd.profile
    if p is None or not in_local_regime(sd.A, sd.eta):
        return None
    return local_regions(sd.A, sd.eta, p)


def check_separation(sd: StepData, tol: float = LEMMA_TOL):
    """For iterates in S: support entries stay above delta/2 and unplayed entries do not grow."""
    name = "local separation inside S"
    params = _local_context(sd)
    if params is None:
        return _skip(name, "(needs a reference equilibrium and eta <= 1/(2|A|))")
    p = sd.profile
    inside = _membership_rows(sd.XP, sd.YP, params, p, "S")
    if not np.any(inside):
        return _skip(name, "(no iterate inside S)")
    slacks = []
    half = params.delta / 2
    for Z, ZP, sup, d in ((sd.X, sd.XP, p.support_x, sd.A.n), (sd.Y, sd.YP, p.support_y, sd.A.m)):
        sup = np.asarray(sup, dtype=np.intp)
        off = np.setdiff1d(np.arange(d), sup)
        slacks.append((np.minimum(Z[inside][:, sup], ZP[inside][:, sup]) - half).ravel())
        if off.size:
            slacks.append((ZP[inside][:, off] - Z[inside][:, off]).ravel())
    return _result(name, np.concatenate(slacks), tol)


def local_start_ok(sd: StepData):
    params = _local_context(sd)
    if params is None:
        return None
    ok = _membership_rows(sd.xs[:1], sd.ys[:1], params, sd.profile, "S0")[0]
    return params if ok else None


def check_stays_in_S(sd: StepData):
    name = "trajectory from S0 stays in S"
    params = local_start_ok(sd)
    if params is None:
        return _skip(name, "(needs eta <= 1/(2|A|) and a start in S0)")
    inside = _membership_rows(sd.xs, sd.ys, params, sd.profile, "S")
    return InvariantResult(name, True, bool(inside.all()), float(inside.all()) - 1.0, int(inside.size),
                           f"(first exit at t={int(np.argmin(inside))})" if not inside.all() else "")


def check_cumulative_energy_increase(sd: StepData, tol: float = 1e-6):
    """Three forms of the bounded cumulative increase of the variant energy.

    (a) ``V_t - V_0 <= delta^2/128`` for every ``t``; (b) the partial sums of
    ``-eta(<gamma, x-x*> + <lambda, y-y*>)`` stay below ``delta^2/128``;
    (c) the sum of positive increments of ``V`` stays below ``delta^2/128``.
    """
    params = local_start_ok(sd)
    names = ("cumulative V increase (telescoped)", "cumulative V increase (inner-product sums)",
             "cumulative V increase (positive parts)")
    if params is None:
        return tuple(_skip(n, "(needs eta <= 1/(2|A|) and a start in S0)") for n in names)
    budget = params.delta ** 2 / 128.0
    a = budget - (sd.V[1:] - sd.V[0])
    b = budget - np.cumsum(_refined_rhs(sd))
    c = budget - np.sum(np.maximum(np.diff(sd.V), 0.0))
    return (_result(names[0], a, tol), _result(names[1], b, tol), _result(names[2], [c], tol))


def check_rate(sd: StepData, tol: float = LEMMA_TOL):
    """Averaged duality gap below the applicable closed-form bound at every t."""
    name = "averaged duality gap below the rate bound"
    a = sd.a
    t = np.arange(1, sd.steps + 1, dtype=float)[:, None]
    ax = np.cumsum(sd.X, axis=0) / t
    ay = np.cumsum(sd.Y, axis=0) / t
    gap = (ax @ a.T).max(axis=1) - (ay @ a).min(axis=1)
    if _interior_regime(sd):
        bound = theorem_bound("interior", 1, sd.eta, sd.A.spectral_norm) / t[:, 0]
        return _result(name + " (interior)", bound - gap, tol)
    params = local_start_ok(sd)
    if params is not None:
        bound = theorem_bound("local", 1, sd.eta, sd.A.spectral_norm, params.delta) / t[:, 0]
        return _result(name + " (local)", bound - gap, tol)
    return _skip(name, "(no rate regime applies)")


def audit_trace(A: PayoffMatrix, trace: IterateTrace, profile: Optional[EquilibriumProfile] = None,
                seed: int = 0, probes: int = 100, probe_steps: Optional[int] = 1000):
    """Evaluate every checker on a stored AltGDA trajectory."""
    rng = np.random.default_rng(seed)
    sd = StepData(A, trace, profile)
    out = check_simplex_elementary(A, rng)
    out += [check_nonsmooth_terms(sd), check_tau_identity(sd), check_pos_qtt(sd, rng, probes),
            check_residual_nonnegative(sd)]
    out += list(check_descent_inequalities(sd, rng, probes, max_steps=probe_steps))
    out += [check_energy_decay(sd), check_decay_identity(sd), check_residual_sandwich(sd),
            check_inner_product_identity(sd), check_refined_energy_change(sd),
            check_separation(sd), check_stays_in_S(sd)]
    out += list(check_cumulative_energy_increase(sd))
    out.append(check_rate(sd))
    return out
