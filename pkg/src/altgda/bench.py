"""Experiment drivers behind the command-line interface.

Everything here writes plain CSV so the figures can be drawn with any tool.
Repeats fan out over a process pool; every worker receives its own seed and
writes nothing, and the parent assembles results in repeat order, so the
output does not depend on ``jobs``.
"""
from __future__ import annotations

import csv
import json
import os
import platform
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .dynamics import RunConfig, run
from .errors import ConfigurationError
from .game import (GENERATOR_VERSION, EquilibriumProfile, GameSpec, MixedStrategy, PayoffMatrix,
                   generate_game, noninterior_3x3, rock_paper_scissors, solve_equilibrium_max_support)

PER_DECADE = 100
INIT_MODES = ("simplex", "vertex")


def log_checkpoints(T: int, per_decade: int = PER_DECADE) -> np.ndarray:
    """Integer steps spaced evenly in ``log10 t``, starting at 1 and ending at ``T``."""
    T = int(T)
    if T < 1:
        raise ConfigurationError("horizon T must be at least 1")
    if T == 1:
        return np.array([1], dtype=np.int64)
    k = int(np.ceil(np.log10(T) * per_decade)) + 1
    pts = np.unique(np.round(np.logspace(0.0, np.log10(T), k)).astype(np.int64))
    pts[0], pts[-1] = 1, T
    return np.unique(pts)


def random_init(d: int, rng: np.random.Generator, mode: str = "simplex") -> np.ndarray:
    """Uniform point on the simplex (normalized exponentials) or a uniform vertex."""
    if mode == "simplex":
        e = rng.exponential(1.0, size=d)
        return e / e.sum()
    if mode == "vertex":
        return np.eye(d)[rng.integers(d)]
    raise ConfigurationError(f"unknown init mode {mode!r}; expected one of {INIT_MODES}")


def ternary(points) -> np.ndarray:
    """Planar coordinates of points on the 3-simplex (unit-side triangle)."""
    p = np.atleast_2d(np.asarray(points, dtype=float))
    return np.column_stack([p[:, 1] + 0.5 * p[:, 2], (np.sqrt(3.0) / 2.0) * p[:, 2]])


@dataclass
class BenchmarkReport:
    """Averaged-gap curves of several repeats on shared checkpoints."""

    t: np.ndarray
    curves: np.ndarray
    seeds: list
    metadata: dict = field(default_factory=dict)
    traces: list = field(default_factory=list, repr=False)

    @property
    def mean(self) -> np.ndarray:
        return self.curves.mean(axis=0)

    @property
    def std(self) -> np.ndarray:
        return self.curves.std(axis=0)

    def gap_at(self, t: int) -> np.ndarray:
        k = int(np.searchsorted(self.t, t))
        if k >= self.t.size or self.t[k] != t:
            raise KeyError(f"step {t} was not recorded")
        return self.curves[:, k]

    def write(self, out_dir, prefix: str) -> list:
        """Per-repeat curves plus one aggregate file; returns the paths written."""
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        paths = []
        for r, curve in enumerate(self.curves):
            p = out / f"{prefix}_repeat{r:02d}.csv"
            _write_columns(p, ("t", "gap_avg"), [self.t, curve])
            paths.append(p)
        p = out / f"{prefix}_aggregate.csv"
        _write_columns(p, ("t", "mean", "std"), [self.t, self.mean, self.std])
        paths.append(p)
        return paths


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{float(v):.17g}"


def _write_columns(path, header, columns) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in zip(*columns):
            w.writerow([_fmt(v) for v in row])


def _one_repeat(args):
    A, algorithm, eta, T, seed, init, ck, profile = args
    rng = np.random.default_rng(seed)
    x0 = random_init(A.n, rng, init)
    y0 = random_init(A.m, rng, init)
    return run(A, RunConfig(eta, T, MixedStrategy(x0), MixedStrategy(y0), algorithm,
                            reference=profile, checkpoints=ck))


def run_benchmark(A: PayoffMatrix, algorithm: str, eta: float, T: int, repeats: int,
                  seed: int = 0, init: str = "simplex", jobs: Optional[int] = None,
                  per_decade: int = PER_DECADE,
                  profile: Optional[EquilibriumProfile] = None) -> BenchmarkReport:
    """Run ``repeats`` trajectories; repeat ``r`` draws its start from seed ``seed + r``.

    With a ``profile`` the per-repeat traces also carry energy columns.
    """
    if repeats < 1:
        raise ConfigurationError("repeats must be at least 1")
    if init not in INIT_MODES:
        raise ConfigurationError(f"unknown init mode {init!r}; expected one of {INIT_MODES}")
    ck = log_checkpoints(T, per_decade)
    seeds = [int(seed) + r for r in range(repeats)]
    tasks = [(A, algorithm, float(eta), int(T), s, init, ck, profile) for s in seeds]
    jobs = resolve_jobs(jobs)
    t0 = time.perf_counter()
    if jobs == 1 or repeats == 1:
        traces = [_one_repeat(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=min(jobs, repeats)) as pool:
            traces = list(pool.map(_one_repeat, tasks))
    curves = [tr.table["gap_avg"] for tr in traces]
    meta = {"algorithm": algorithm, "eta": float(eta), "T": int(T), "repeats": int(repeats),
            "seed": int(seed), "init": init, "wall_time_s": time.perf_counter() - t0,
            "shape": list(A.shape)}
    return BenchmarkReport(ck, np.array(curves), seeds, meta, traces)


def resolve_jobs(jobs: Optional[int]) -> int:
    if jobs is None:
        return max(1, os.cpu_count() or 1)
    if int(jobs) < 1:
        raise ConfigurationError("--jobs must be at least 1")
    return int(jobs)


def version_info() -> dict:
    import numba
    import scipy

    return {"altgda": __version__, "generator": GENERATOR_VERSION, "python": platform.python_version(),
            "numpy": np.__version__, "scipy": scipy.__version__, "numba": numba.__version__}


def write_manifest(out_dir, config: dict, extra: Optional[dict] = None) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    doc = {"config": config, "versions": version_info()}
    if extra:
        doc.update(extra)
    p = out / "manifest.json"
    p.write_text(json.dumps(doc, indent=2, sort_keys=True, default=_json_default) + "\n")
    return p


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, Path):
        return str(o)
    raise TypeError(f"not serializable: {type(o).__name__}")


# -- figure data ---------------------------------------------------------------

def trajectory_study(A: PayoffMatrix, profile: EquilibriumProfile, x0, y0, eta: float, T: int):
    """Full AltGDA trajectory with gap and energy at every step."""
    cfg = RunConfig(eta, T, MixedStrategy(x0), MixedStrategy(y0), "altgda",
                    reference=profile, store_iterates=True)
    return run(A, cfg)


def write_trajectory_files(trace, out_dir, prefix: str) -> list:
    """Ternary trajectory, gap curve and energy curve of a 3x3 run."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    steps = np.arange(trace.xs.shape[0])
    tx, ty = ternary(trace.xs), ternary(trace.ys)
    p1 = out / f"{prefix}_trajectory.csv"
    _write_columns(p1, ("t", "x_u", "x_v", "y_u", "y_v"), [steps, tx[:, 0], tx[:, 1], ty[:, 0], ty[:, 1]])
    p2 = out / f"{prefix}_gap.csv"
    _write_columns(p2, ("t", "gap_avg"), [trace.t, trace.table["gap_avg"]])
    p3 = out / f"{prefix}_energy.csv"
    _write_columns(p3, ("t", "energy_E"), [steps, trace.energies("E")])
    return [p1, p2, p3]


def reproduce_fig2(out_dir, T: int = 10_000, eta: float = 0.01):
    A = rock_paper_scissors()
    prof = solve_equilibrium_max_support(A)
    tr = trajectory_study(A, prof, [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], eta, T)
    return tr, write_trajectory_files(tr, out_dir, "fig2")


def reproduce_fig3(out_dir, T: int = 10_000, eta: float = 0.01):
    A = noninterior_3x3()
    prof = solve_equilibrium_max_support(A)
    u = np.full(3, 1.0 / 3.0)
    tr = trajectory_study(A, prof, u, u, eta, T)
    return tr, write_trajectory_files(tr, out_dir, "fig3")


def reproduce_fig4(out_dir, m: int = 10, n: int = 20, T: int = 1_000_000, eta: float = 0.01,
                   repeats: int = 10, seed: int = 0, jobs: Optional[int] = None, distributions=None):
    """Both dynamics on one game per distribution; game seed and init seeds derive from ``seed``."""
    from .game import DISTRIBUTIONS

    dists = distributions or [d for d in DISTRIBUTIONS if d != "explicit"]
    reports = {}
    for d in dists:
        A = generate_game(GameSpec(m, n, d, seed))
        for alg in ("altgda", "simgda"):
            rep = run_benchmark(A, alg, eta, T, repeats, seed, "simplex", jobs)
            rep.metadata["distribution"] = d
            rep.write(out_dir, f"fig4_{d}_{m}x{n}_{alg}")
            reports[(d, alg)] = rep
    return reports
