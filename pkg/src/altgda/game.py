"""Matrix games over probability simplices.

The convention throughout the package is ``min_x max_y y^T A x`` with
``A`` of shape ``(m, n)``, ``x`` in the ``n``-simplex and ``y`` in the
``m``-simplex.  ``A`` is the payoff received by the row player ``y``.
"""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from importlib import resources
from typing import Optional, Sequence

import numpy as np

from .errors import ConfigurationError, ContractViolation, DegeneracyError, ScaleError

#: Entries in ``[-CLAMP_TOL, 0)`` are treated as rounding dust.
CLAMP_TOL = 1e-12
#: Maximum allowed deviation of a strategy's total mass from one.
SUM_TOL = 1e-10
#: Largest side length accepted by the support-enumeration solver.
MAX_ENUM_DIM = 12
#: Bumped whenever ``generate_game`` changes the stream it draws from.
GENERATOR_VERSION = 1

DISTRIBUTIONS = ("uniform01", "randint", "binary", "normal", "lognormal",
                 "exponential", "explicit")


@dataclass(frozen=True, eq=False)
class MixedStrategy:
    """A point of the probability simplex.

    Negative entries no smaller than ``-1e-12`` are clamped to zero and the
    vector is renormalized; anything further outside the simplex is rejected.
    """

    probs: np.ndarray

    def __post_init__(self):
        p = np.array(self.probs, dtype=float).reshape(-1)
        if p.size == 0:
            raise ContractViolation("a mixed strategy needs at least one entry")
        if not np.all(np.isfinite(p)):
            raise ContractViolation("mixed strategy has non-finite entries")
        if p.min() < -CLAMP_TOL:
            raise ContractViolation(f"negative probability {p.min():.3e}")
        total = p.sum()
        if abs(total - 1.0) > SUM_TOL:
            raise ContractViolation(f"probabilities sum to {total!r}, not 1")
        if p.min() < 0.0:
            p = np.maximum(p, 0.0)
            p /= p.sum()
        p.flags.writeable = False
        object.__setattr__(self, "probs", p)

    @property
    def dim(self) -> int:
        return self.probs.size

    @property
    def support(self) -> tuple:
        return tuple(int(i) for i in np.flatnonzero(self.probs > 0))

    @classmethod
    def uniform(cls, d: int) -> "MixedStrategy":
        return cls(np.full(d, 1.0 / d))

    @classmethod
    def vertex(cls, d: int, i: int) -> "MixedStrategy":
        e = np.zeros(d)
        e[i] = 1.0
        return cls(e)

    def __array__(self, dtype=None, copy=None):
        return self.probs if dtype is None else self.probs.astype(dtype)

    def __repr__(self):
        return f"MixedStrategy({np.array2string(self.probs, precision=6)})"


def as_probs(s) -> np.ndarray:
    """Return the probability vector of a strategy or array-like."""
    if isinstance(s, MixedStrategy):
        return s.probs
    return np.asarray(s, dtype=float)


@dataclass(frozen=True, eq=False)
class PayoffMatrix:
    """Dense payoff matrix with its spectral norm cached at construction."""

    entries: np.ndarray
    spectral_norm: float = field(init=False)

    def __post_init__(self):
        a = np.array(self.entries, dtype=float)
        if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 1:
            raise ContractViolation(f"payoff matrix must be 2-D and non-empty, got shape {a.shape}")
        if not np.all(np.isfinite(a)):
            raise ContractViolation("payoff matrix has non-finite entries")
        a = np.ascontiguousarray(a)
        a.flags.writeable = False
        object.__setattr__(self, "entries", a)
        object.__setattr__(self, "spectral_norm", _sigma_max(a))

    @property
    def m(self) -> int:
        return self.entries.shape[0]

    @property
    def n(self) -> int:
        return self.entries.shape[1]

    @property
    def shape(self) -> tuple:
        return self.entries.shape

    def scaled(self, c: float) -> "PayoffMatrix":
        return PayoffMatrix(c * self.entries)

    def __repr__(self):
        return f"PayoffMatrix(m={self.m}, n={self.n}, norm={self.spectral_norm:.6g})"


def _sigma_max(a: np.ndarray) -> float:
    if not np.any(a):
        return 0.0
    return float(np.linalg.norm(a, 2))


def spectral_norm(A: PayoffMatrix) -> float:
    """Largest singular value of ``A`` (cached on the matrix)."""
    return A.spectral_norm


def _check_dims(A: PayoffMatrix, x: np.ndarray, y: np.ndarray) -> None:
    if x.shape != (A.n,) or y.shape != (A.m,):
        raise ContractViolation(
            f"strategy dims ({x.size}, {y.size}) do not match matrix {A.m}x{A.n}")


def duality_gap(A: PayoffMatrix, x, y) -> float:
    """``max_j (Ax)_j - min_i (A^T y)_i``, which is zero exactly at equilibria."""
    x, y = as_probs(x), as_probs(y)
    _check_dims(A, x, y)
    a = A.entries
    return float(np.max(a @ x) - np.min(a.T @ y))


@dataclass(frozen=True, eq=False)
class EquilibriumProfile:
    """A verified Nash equilibrium together with the local-analysis margin."""

    x_star: MixedStrategy
    y_star: MixedStrategy
    nu_star: float
    support_x: tuple
    support_y: tuple
    is_interior: bool
    delta: float

    @classmethod
    def from_strategies(cls, A: PayoffMatrix, x_star, y_star, gap_tol: float = 1e-9
                        ) -> "EquilibriumProfile":
        """Build and verify a profile from a user-supplied equilibrium pair."""
        xs = x_star if isinstance(x_star, MixedStrategy) else MixedStrategy(x_star)
        ys = y_star if isinstance(y_star, MixedStrategy) else MixedStrategy(y_star)
        gap = duality_gap(A, xs, ys)
        if gap > gap_tol:
            raise ContractViolation(f"supplied pair is not an equilibrium (gap {gap:.3e})")
        nu = float(ys.probs @ A.entries @ xs.probs)
        sx, sy = xs.support, ys.support
        interior = len(sx) == A.n and len(sy) == A.m
        delta = _delta(A.entries, A.spectral_norm, xs.probs, ys.probs, nu, sx, sy)
        return cls(xs, ys, nu, sx, sy, interior, delta)


def _delta(a, norm_a, x, y, nu, sx, sy) -> float:
    terms = [x[list(sx)].min(), y[list(sy)].min()]
    if norm_a > 0:
        off_x = np.setdiff1d(np.arange(a.shape[1]), sx)
        off_y = np.setdiff1d(np.arange(a.shape[0]), sy)
        if off_x.size:
            terms.append(((a.T @ y)[off_x].min() - nu) / norm_a)
        if off_y.size:
            terms.append((nu - (a @ x)[off_y].max()) / norm_a)
    return float(max(min(terms), 0.0))


def delta_margin(A: PayoffMatrix, profile: EquilibriumProfile) -> float:
    """Recompute the margin ``delta`` from the profile's stored fields.

    The margin is the smallest of the support probabilities of both players
    and the normalized payoff advantages of every unplayed action.  For the
    zero matrix only the probability terms remain.
    """
    return _delta(A.entries, A.spectral_norm, profile.x_star.probs, profile.y_star.probs,
                  profile.nu_star, profile.support_x, profile.support_y)


def _square_kernels(a: np.ndarray, k: int, tol: float):
    """Solve every bordered ``k x k`` subsystem ``M z = nu 1, 1^T z = 1``.

    Yields ``(cols, z, nu)`` batches where ``cols`` indexes the support of ``z``
    inside the columns of ``a``.  Singular or ill-conditioned subsystems are
    dropped.
    """
    m, n = a.shape
    rows = np.array(list(itertools.combinations(range(m), k)), dtype=np.intp)
    cols = np.array(list(itertools.combinations(range(n), k)), dtype=np.intp)
    rhs = np.zeros(k + 1)
    rhs[-1] = 1.0
    chunk = max(1, 200_000 // max(len(rows), 1))
    for c0 in range(0, len(cols), chunk):
        cc = cols[c0:c0 + chunk]
        r_idx = np.repeat(rows, len(cc), axis=0)
        c_idx = np.tile(cc, (len(rows), 1))
        sub = a[r_idx[:, :, None], c_idx[:, None, :]]
        big = np.empty((len(sub), k + 1, k + 1))
        big[:, :k, :k] = sub
        big[:, :k, k] = -1.0
        big[:, k, :k] = 1.0
        big[:, k, k] = 0.0
        cond = np.linalg.cond(big)
        ok = np.isfinite(cond) & (cond < 1.0 / tol)
        if not np.any(ok):
            continue
        sol = np.linalg.solve(big[ok], np.broadcast_to(rhs, (int(ok.sum()), k + 1))[..., None])[..., 0]
        yield c_idx[ok], sol[:, :k], sol[:, k]


def _extreme_strategies(a: np.ndarray, tol: float):
    """Candidate extreme strategies of the minimizing column player of ``a``.

    Returns the dense candidates and their guaranteed worst case
    ``max_i (a x)_i``.
    """
    m, n = a.shape
    found = []
    for k in range(1, min(m, n) + 1):
        for cols, z, _nu in _square_kernels(a, k, tol):
            keep = z.min(axis=1) >= -1e-9
            if not np.any(keep):
                continue
            xs = np.zeros((int(keep.sum()), n))
            np.put_along_axis(xs, cols[keep], np.maximum(z[keep], 0.0), axis=1)
            xs /= xs.sum(axis=1, keepdims=True)
            found.append(xs)
    if not found:
        return np.zeros((0, n)), np.zeros(0)
    xs = np.vstack(found)
    return xs, (xs @ a.T).max(axis=1)


def _optimal_face_center(xs, worst, nu, tol):
    opt = xs[worst <= nu + tol]
    opt = np.where(opt < 1e-12, 0.0, opt)
    opt = np.unique(np.round(opt, 12), axis=0)
    center = opt.mean(axis=0)
    center[center < 1e-12] = 0.0
    return center / center.sum()


def solve_equilibrium_max_support(A: PayoffMatrix, tol: float = 1e-9) -> EquilibriumProfile:
    """Exact equilibrium of maximal support by enumerating square subsystems.

    Every extreme optimal strategy of a finite zero-sum game solves a square
    bordered system built from some ``k x k`` submatrix.  The candidates of
    each player are enumerated, the game value is the best guaranteed payoff
    among them, and the centroid of all optimal extreme strategies lies in the
    relative interior of the optimal face, hence has maximal support.
    """
    m, n = A.shape
    if max(m, n) > MAX_ENUM_DIM:
        raise ScaleError(
            f"support enumeration is limited to {MAX_ENUM_DIM} actions per player, got {m}x{n}; "
            "pass a known equilibrium to EquilibriumProfile.from_strategies instead")
    a = A.entries
    scale = max(1.0, float(np.abs(a).max()))
    xs, x_worst = _extreme_strategies(a, 1e-12)
    ys, y_worst = _extreme_strategies(-a.T, 1e-12)
    if xs.shape[0] == 0 or ys.shape[0] == 0:
        raise DegeneracyError("no nonsingular support system found; perturb the matrix slightly")
    nu_up = float(x_worst.min())
    nu_lo = float(-y_worst.min())
    vtol = 1e-9 * scale
    if nu_up - nu_lo > vtol:
        raise DegeneracyError(
            f"enumerated values disagree (upper {nu_up!r}, lower {nu_lo!r}); perturb the matrix slightly")
    x_star = _optimal_face_center(xs, x_worst, nu_up, vtol)
    y_star = _optimal_face_center(ys, y_worst, -nu_lo, vtol)
    try:
        return EquilibriumProfile.from_strategies(A, x_star, y_star, gap_tol=tol * scale)
    except ContractViolation as exc:
        raise DegeneracyError(f"{exc}; perturb the matrix slightly") from exc


@dataclass(frozen=True)
class GameSpec:
    """Recipe for a payoff matrix: size, entry distribution and seed."""

    m: int
    n: int
    distribution: str
    seed: int = 0
    explicit_entries: Optional[Sequence[Sequence[float]]] = None

    def __post_init__(self):
        if self.distribution not in DISTRIBUTIONS:
            raise ConfigurationError(
                f"unknown distribution {self.distribution!r}; expected one of {DISTRIBUTIONS}")
        if self.m < 1 or self.n < 1:
            raise ConfigurationError("game dimensions must be positive")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise ConfigurationError("seed must be an unsigned 64-bit integer")
        if self.distribution == "explicit" and self.explicit_entries is None:
            raise ConfigurationError("explicit distribution needs explicit_entries")

    def to_json(self) -> str:
        return json.dumps({"m": self.m, "n": self.n, "distribution": self.distribution,
                           "seed": int(self.seed)})

    @classmethod
    def from_json(cls, text: str) -> "GameSpec":
        d = json.loads(text)
        return cls(int(d["m"]), int(d["n"]), d["distribution"], int(d.get("seed", 0)),
                   d.get("explicit_entries"))


def generate_game(spec: GameSpec) -> PayoffMatrix:
    """Sample a payoff matrix; identical specs give identical matrices."""
    shape = (spec.m, spec.n)
    if spec.distribution == "explicit":
        a = np.asarray(spec.explicit_entries, dtype=float)
        if a.shape != shape:
            raise ConfigurationError(f"explicit entries have shape {a.shape}, spec says {shape}")
        return PayoffMatrix(a)
    rng = np.random.default_rng(int(spec.seed))
    if spec.distribution == "uniform01":
        a = rng.random(shape)
    elif spec.distribution == "randint":
        a = rng.integers(-10, 10, size=shape, endpoint=True).astype(float)
    elif spec.distribution == "binary":
        a = (rng.random(shape) >= 0.8).astype(float)
    elif spec.distribution == "normal":
        a = rng.standard_normal(shape)
    elif spec.distribution == "lognormal":
        a = rng.lognormal(0.0, 1.0, size=shape)
    else:
        a = rng.exponential(1.0, size=shape)
    return PayoffMatrix(a)


def save_matrix(A: PayoffMatrix, path) -> None:
    """Write the plain-text matrix format: ``m n`` then one row per line."""
    with open(path, "w") as fh:
        fh.write(format_matrix(A))


def format_matrix(A: PayoffMatrix) -> str:
    lines = [f"{A.m} {A.n}"]
    lines += [" ".join(f"{v:.17g}" for v in row) for row in A.entries]
    return "\n".join(lines) + "\n"


def parse_matrix(text: str) -> PayoffMatrix:
    rows = [ln.split() for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
    if not rows:
        raise ContractViolation("empty matrix file")
    try:
        m, n = int(rows[0][0]), int(rows[0][1])
        a = np.array([[float(v) for v in r] for r in rows[1:]], dtype=float)
    except (ValueError, IndexError) as exc:
        raise ContractViolation(f"malformed matrix file: {exc}") from exc
    if a.shape != (m, n):
        raise ContractViolation(f"matrix header says {m}x{n} but body is {a.shape}")
    return PayoffMatrix(a)


def load_matrix(path) -> PayoffMatrix:
    with open(path) as fh:
        return parse_matrix(fh.read())


def rock_paper_scissors() -> PayoffMatrix:
    return PayoffMatrix([[0.0, -1.0, 1.0], [1.0, 0.0, -1.0], [-1.0, 1.0, 0.0]])


def matching_pennies() -> PayoffMatrix:
    return PayoffMatrix([[1.0, -1.0], [-1.0, 1.0]])


def noninterior_3x3() -> PayoffMatrix:
    """The checked-in 3x3 game whose unique equilibrium is not interior.

    The entries are the transpose of numpy's legacy ``np.random.seed(1);
    np.random.randn(3, 3)``.  Its equilibrium is approximately
    ``x* = (0, 0.564, 0.436)``, ``y* = (0.366, 0.634, 0)``.
    """
    text = resources.files("altgda.data").joinpath("noninterior_3x3.txt").read_text()
    return parse_matrix(text)
