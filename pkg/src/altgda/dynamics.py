"""AltGDA and SimGDA runs with convergence diagnostics.

A run produces an :class:`IterateTrace`: running averages and a table of
diagnostics at recorded steps, plus (optionally) every iterate.  Row ``t`` of
the table describes the state after ``t`` steps; its ``residual_r``,
``gamma_bar`` and ``lambda_bar`` describe the step that produced it, i.e. the
step from ``t-1`` to ``t``.

All lemma-level comparisons elsewhere in the package use the absolute slack
:data:`LEMMA_TOL`.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from ._kernels import gda_run
from .errors import ConfigurationError, ContractViolation, PreconditionError, SamplingError
from .game import EquilibriumProfile, MixedStrategy, PayoffMatrix, as_probs
from .projections import check_step

LEMMA_TOL = 1e-9
ALGORITHMS = ("altgda", "simgda")
TRACE_HEADER = ("t", "gap_avg", "energy_E", "energy_V", "residual_r",
                "gamma_bar", "lambda_bar", "in_S", "in_S0")


@dataclass(frozen=True, eq=False)
class RunConfig:
    eta: float
    T: int
    x0: MixedStrategy
    y0: MixedStrategy
    algorithm: str = "altgda"
    record_stride: int = 1
    reference: Optional[EquilibriumProfile] = None
    checkpoints: Optional[np.ndarray] = None
    store_iterates: bool = False

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ConfigurationError(f"unknown algorithm {self.algorithm!r}")
        if not (np.isfinite(self.eta) and self.eta > 0):
            raise ConfigurationError("stepsize must be finite and positive")
        if int(self.T) < 1:
            raise ConfigurationError("horizon T must be at least 1")
        if int(self.record_stride) < 1:
            raise ConfigurationError("record_stride must be a positive integer")
        for name in ("x0", "y0"):
            s = getattr(self, name)
            if not isinstance(s, MixedStrategy):
                object.__setattr__(self, name, MixedStrategy(s))

    def schedule(self) -> np.ndarray:
        """Recorded step indices, always ending at ``T``."""
        T = int(self.T)
        if self.checkpoints is not None:
            c = np.unique(np.asarray(self.checkpoints, dtype=np.int64))
            if c.size == 0 or c[0] < 1 or c[-1] > T:
                raise ConfigurationError("checkpoints must lie in 1..T")
            return c
        c = np.arange(self.record_stride, T + 1, self.record_stride, dtype=np.int64)
        if c.size == 0 or c[-1] != T:
            c = np.append(c, T)
        return c


@dataclass(frozen=True)
class StepDiagnostics:
    t: int
    gap_avg: float
    energy_E: Optional[float]
    energy_V: Optional[float]
    residual_r: Optional[float]
    gamma_bar: Optional[float]
    lambda_bar: Optional[float]
    in_S: Optional[bool]
    in_S0: Optional[bool]


@dataclass(frozen=True)
class LocalRegionParams:
    """Radii and tail caps of the local regions ``S`` and ``S0``.

    ``S``: both players within ``delta/4`` of the equilibrium and every
    unplayed action below ``(eta ||A|| / 2) r delta``.  ``S0`` halves the radii
    and uses ``c`` in place of ``eta ||A||``.
    """

    eta: float
    norm_A: float
    delta: float
    r_x: float
    r_y: float
    c: float
    radius_S: float
    radius_S0: float
    tail_cap_S: tuple
    tail_cap_S0: tuple
    tail_redundant: tuple


@dataclass(eq=False)
class IterateTrace:
    """Output of :func:`run`.

    ``table`` maps each CSV column to an array over recorded steps; missing
    quantities are NaN.  ``avg_x``/``avg_y`` hold the running averages at the
    recorded steps.  ``xs``/``ys`` hold ``x^0..x^T`` when storage was requested.
    """

    config: RunConfig
    A: PayoffMatrix
    t: np.ndarray
    avg_x: np.ndarray
    avg_y: np.ndarray
    last_x: np.ndarray
    last_y: np.ndarray
    table: dict
    initial_energy_E: Optional[float] = None
    initial_energy_V: Optional[float] = None
    xs: Optional[np.ndarray] = None
    ys: Optional[np.ndarray] = None
    regions: Optional[LocalRegionParams] = field(default=None)

    @property
    def averages(self):
        return list(zip(self.avg_x, self.avg_y))

    @property
    def diagnostics(self):
        out = []
        cols = self.table
        for k, t in enumerate(self.t):
            def opt(name):
                v = cols[name][k]
                return None if np.isnan(v) else float(v)

            def optb(name):
                v = cols[name][k]
                return None if np.isnan(v) else bool(v)

            out.append(StepDiagnostics(int(t), float(cols["gap_avg"][k]), opt("energy_E"),
                                       opt("energy_V"), opt("residual_r"), opt("gamma_bar"),
                                       opt("lambda_bar"), optb("in_S"), optb("in_S0")))
        return out

    @property
    def final_gap(self) -> float:
        return float(self.table["gap_avg"][-1])

    def energies(self, kind: str = "E") -> np.ndarray:
        """Energy at ``t = 0`` followed by the recorded values (stride 1 runs)."""
        init = self.initial_energy_E if kind == "E" else self.initial_energy_V
        return np.concatenate([[init], self.table["energy_" + kind]])

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(TRACE_HEADER)
            for k, t in enumerate(self.t):
                row = [str(int(t))]
                for name in TRACE_HEADER[1:]:
                    v = self.table[name][k]
                    if np.isnan(v):
                        row.append("")
                    elif name.startswith("in_"):
                        row.append(str(int(v)))
                    else:
                        row.append(f"{v:.17g}")
                w.writerow(row)


def _rowdot(a, b):
    return np.einsum("ij,ij->i", a, b)


def _energy_rows(a, eta, X, Y, xs, ys):
    return (_rowdot(X - xs, X - xs) + _rowdot(Y - ys, Y - ys)
            - eta * _rowdot(Y, X @ a.T))


def _energy_v_rows(a, eta, X, Y, xs, ys):
    dx, dy = X - xs, Y - ys
    return _rowdot(dx, dx) + _rowdot(dy, dy) - eta * _rowdot(dy, dx @ a.T)


def _membership_rows(X, Y, params: LocalRegionParams, profile: EquilibriumProfile, which: str):
    if which == "S":
        rad, (cx, cy) = params.radius_S, params.tail_cap_S
    elif which == "S0":
        rad, (cx, cy) = params.radius_S0, params.tail_cap_S0
    else:
        raise ConfigurationError(f"unknown region {which!r}")
    xs, ys = profile.x_star.probs, profile.y_star.probs
    ok = np.sqrt(_rowdot(X - xs, X - xs)) <= rad
    ok &= np.sqrt(_rowdot(Y - ys, Y - ys)) <= rad
    off_x = np.setdiff1d(np.arange(xs.size), profile.support_x)
    off_y = np.setdiff1d(np.arange(ys.size), profile.support_y)
    if off_x.size:
        ok &= X[:, off_x].max(axis=1) <= cx
    if off_y.size:
        ok &= Y[:, off_y].max(axis=1) <= cy
    return ok


def run(A: PayoffMatrix, cfg: RunConfig) -> IterateTrace:
    """Run ``cfg.T`` steps of AltGDA or SimGDA from ``(x0, y0)``.

    AltGDA: ``x+ = P(x - eta A^T y)``, then ``y+ = P(y + eta A x+)``.  SimGDA
    uses ``A x`` in place of ``A x+``.  Averages cover ``x^1..x^T``.
    """
    a = A.entries
    x0, y0 = cfg.x0.probs, cfg.y0.probs
    if x0.size != A.n or y0.size != A.m:
        raise ContractViolation(f"initial point dims ({x0.size}, {y0.size}) do not match {A.m}x{A.n}")
    alt = cfg.algorithm == "altgda"
    eta = float(cfg.eta)
    ck = cfg.schedule()
    XP, YP, X, Y, SX, SY, xs, ys = gda_run(a, eta, x0.copy(), y0.copy(), int(cfg.T), alt, ck,
                                           bool(cfg.store_iterates))
    tt = ck.astype(float)[:, None]
    AX, AY = SX / tt, SY / tt
    gap = (AX @ a.T).max(axis=1) - (AY @ a).min(axis=1)
    K = ck.size
    nan = np.full(K, np.nan)
    table = {"gap_avg": gap, "energy_E": nan.copy(), "energy_V": nan.copy(),
             "residual_r": nan.copy(), "gamma_bar": nan.copy(), "lambda_bar": nan.copy(),
             "in_S": nan.copy(), "in_S0": nan.copy()}
    if alt:
        gy = YP @ a
        gx = X @ a.T
        table["residual_r"] = (_rowdot(-eta * gy - X + XP, X - XP)
                               + _rowdot(eta * gx - Y + YP, Y - YP))
        v = -gy + gy.mean(axis=1, keepdims=True)
        u = gx - gx.mean(axis=1, keepdims=True)
        table["gamma_bar"] = ((XP + eta * v - X) / eta).max(axis=1)
        table["lambda_bar"] = ((YP + eta * u - Y) / eta).max(axis=1)
    e0 = v0 = None
    regions = None
    ref = cfg.reference
    if ref is not None:
        xs_, ys_ = ref.x_star.probs, ref.y_star.probs
        table["energy_E"] = _energy_rows(a, eta, X, Y, xs_, ys_)
        table["energy_V"] = _energy_v_rows(a, eta, X, Y, xs_, ys_)
        e0 = float(_energy_rows(a, eta, x0[None], y0[None], xs_, ys_)[0])
        v0 = float(_energy_v_rows(a, eta, x0[None], y0[None], xs_, ys_)[0])
        if in_local_regime(A, eta):
            regions = local_regions(A, eta, ref)
            table["in_S"] = _membership_rows(X, Y, regions, ref, "S").astype(float)
            table["in_S0"] = _membership_rows(X, Y, regions, ref, "S0").astype(float)
    return IterateTrace(cfg, A, ck, AX, AY, X[-1].copy(), Y[-1].copy(), table, e0, v0,
                        xs if cfg.store_iterates else None,
                        ys if cfg.store_iterates else None, regions)


def energy(A: PayoffMatrix, eta: float, x, y, profile: EquilibriumProfile) -> float:
    """``||x - x*||^2 + ||y - y*||^2 - eta y^T A x``."""
    x, y = as_probs(x), as_probs(y)
    return float(_energy_rows(A.entries, eta, x[None], y[None],
                              profile.x_star.probs, profile.y_star.probs)[0])


def energy_variant(A: PayoffMatrix, eta: float, x, y, profile: EquilibriumProfile) -> float:
    """``||x - x*||^2 + ||y - y*||^2 - eta (y - y*)^T A (x - x*)``."""
    x, y = as_probs(x), as_probs(y)
    return float(_energy_v_rows(A.entries, eta, x[None], y[None],
                                profile.x_star.probs, profile.y_star.probs)[0])


def residual(A: PayoffMatrix, eta: float, x_t, y_t, x_next, y_next) -> float:
    """Non-telescoping remainder ``r_t`` of one AltGDA step (nonnegative)."""
    check_step(A, eta, x_t, y_t, x_next, y_next)
    a = A.entries
    x_t, y_t, x_next, y_next = map(as_probs, (x_t, y_t, x_next, y_next))
    dx, dy = x_next - x_t, y_next - y_t
    return float((-eta * (a.T @ y_t) - dx) @ dx + (eta * (a @ x_next) - dy) @ dy)


def potentials(A: PayoffMatrix, eta: float, trace: IterateTrace, t: int, x, y):
    """Descent potentials ``(phi_t, psi_t)`` at the probe ``(x, y)``.

    ``phi_t = |x^t - x|^2/2 + |y^t - y|^2/2 + eta (y^t)^T A x`` and
    ``psi_t = |x^t - x|^2/2 + |y^{t-1} - y|^2/2 - |y^t - y^{t-1}|^2/2``.
    ``psi`` needs ``t >= 1``; use :func:`phi_potential` alone at ``t = 0``.
    """
    if trace.xs is None:
        raise ContractViolation("potentials need a trace with stored iterates")
    if t < 1:
        raise IndexError("psi_t is defined for t >= 1 only")
    return phi_potential(A, eta, trace, t, x, y), _psi(trace, t, x, y)


def phi_potential(A: PayoffMatrix, eta: float, trace: IterateTrace, t: int, x, y) -> float:
    x, y = as_probs(x), as_probs(y)
    xt, yt = trace.xs[t], trace.ys[t]
    return float(0.5 * (xt - x) @ (xt - x) + 0.5 * (yt - y) @ (yt - y) + eta * yt @ A.entries @ x)


def _psi(trace, t, x, y):
    x, y = as_probs(x), as_probs(y)
    xt, yt, yp = trace.xs[t], trace.ys[t], trace.ys[t - 1]
    return float(0.5 * (xt - x) @ (xt - x) + 0.5 * (yp - y) @ (yp - y)
                 - 0.5 * (yt - yp) @ (yt - yp))


def interior_stepsize_bound(A: PayoffMatrix, profile: EquilibriumProfile) -> float:
    """Largest stepsize covered by the interior-equilibrium rate."""
    if not profile.is_interior:
        raise PreconditionError("the interior stepsize bound needs an interior equilibrium")
    if A.spectral_norm == 0:
        return float("inf")
    return float(min(profile.x_star.probs.min(), profile.y_star.probs.min()) / A.spectral_norm)


def theorem_bound(kind: str, T: int, eta: float, norm_A: float, delta: Optional[float] = None) -> float:
    """Closed-form duality-gap bound after ``T`` steps.

    ``interior``: ``(9 + 4 eta ||A||) / (eta T)``;
    ``local``: ``(9 + 7 eta ||A|| + delta^2/128) / (eta T)``.
    """
    if T < 1:
        raise ConfigurationError("T must be at least 1")
    if kind == "interior":
        return (9.0 + 4.0 * eta * norm_A) / (eta * T)
    if kind == "local":
        if delta is None:
            raise ConfigurationError("the local bound needs delta")
        return (9.0 + 7.0 * eta * norm_A + delta ** 2 / 128.0) / (eta * T)
    raise ConfigurationError(f"unknown bound kind {kind!r}")


def in_local_regime(A: PayoffMatrix, eta: float) -> bool:
    return eta * 2.0 * A.spectral_norm <= 1.0 + 1e-12


def local_regions(A: PayoffMatrix, eta: float, profile: EquilibriumProfile) -> LocalRegionParams:
    """Radii and caps of ``S`` and ``S0`` around a max-support equilibrium."""
    if not in_local_regime(A, eta):
        raise PreconditionError(
            f"eta = {eta} exceeds 1/(2||A||) = {0.5 / A.spectral_norm}; the local-region "
            "separation argument only applies for eta <= 1/(2||A||)")
    d = profile.delta
    ni, nj = len(profile.support_x), len(profile.support_y)
    r_x = float(A.n) if ni == A.n else min(ni / (A.n - ni), float(A.n))
    r_y = float(A.m) if nj == A.m else min(nj / (A.m - nj), float(A.m))
    en = eta * A.spectral_norm
    c = min(en, d / (192.0 * ni), d / (192.0 * nj))
    return LocalRegionParams(
        eta=eta, norm_A=A.spectral_norm, delta=d, r_x=r_x, r_y=r_y, c=c,
        radius_S=d / 4.0, radius_S0=d / 8.0,
        tail_cap_S=(0.5 * en * r_x * d, 0.5 * en * r_y * d),
        tail_cap_S0=(0.5 * c * r_x * d, 0.5 * c * r_y * d),
        tail_redundant=(ni == A.n, nj == A.m))


def membership(point_pair, params: LocalRegionParams, profile: EquilibriumProfile, which: str = "S") -> bool:
    """Whether ``(x, y)`` satisfies every constraint of region ``S`` or ``S0``."""
    x, y = (as_probs(p) for p in point_pair)
    return bool(_membership_rows(x[None], y[None], params, profile, which)[0])


def _perturb(rng, star, support, cap, radius):
    d = star.size
    z = star.copy()
    sup = np.asarray(support, dtype=np.intp)
    off = np.setdiff1d(np.arange(d), sup)
    if off.size:
        z[off] = rng.uniform(0.0, min(cap, radius / np.sqrt(2 * off.size)), size=off.size)
        z[sup] -= z[off].sum() / sup.size
    if sup.size > 1:
        g = rng.standard_normal(sup.size)
        g -= g.mean()
        norm = np.linalg.norm(g)
        if norm > 0:
            z[sup] += g / norm * radius * 0.5 * rng.random()
    return z


def sample_init_in_S0(params: LocalRegionParams, profile: EquilibriumProfile, seed: int,
                      radius: Optional[float] = None, max_tries: int = 100_000):
    """Rejection-sample an initial pair inside ``S0``.

    Proposals perturb ``(x*, y*)`` within ``radius`` (default: the ``S0``
    radius).  With ``radius = 0`` the equilibrium itself is returned.
    """
    rad = params.radius_S0 if radius is None else float(radius)
    xs, ys = profile.x_star.probs, profile.y_star.probs
    if rad == 0:
        return profile.x_star, profile.y_star
    rng = np.random.default_rng(seed)
    for _ in range(max_tries):
        x = _perturb(rng, xs, profile.support_x, params.tail_cap_S0[0], rad)
        y = _perturb(rng, ys, profile.support_y, params.tail_cap_S0[1], rad)
        if x.min() < 0 or y.min() < 0:
            continue
        if _membership_rows(x[None], y[None], params, profile, "S0")[0]:
            return MixedStrategy(x / x.sum()), MixedStrategy(y / y.sum())
    raise SamplingError(f"no point of S0 found after {max_tries} proposals; the region is too thin")


def replay_check(A: PayoffMatrix, trace: IterateTrace, t: int) -> None:
    """Replay-check the stored step ``t -> t+1`` of an AltGDA trace."""
    check_step(A, trace.config.eta, trace.xs[t], trace.ys[t], trace.xs[t + 1], trace.ys[t + 1])


def with_reference(cfg: RunConfig, profile: EquilibriumProfile) -> RunConfig:
    return replace(cfg, reference=profile)
