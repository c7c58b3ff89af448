"""Grid-refinement search for the stepsize minimizing the worst-case gap."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ConfigurationError

ETA_FLOOR = 1e-6


@dataclass(frozen=True)
class SearchConfig:
    eta_min: float
    eta_max: float
    points_n: int = 20
    shrink_alpha: float = 1.0
    tol_eps: float = 1e-3
    max_rounds: int = 50

    def __post_init__(self):
        if not (0 < self.eta_min < self.eta_max):
            raise ConfigurationError("need 0 < eta_min < eta_max")
        if self.points_n < 3:
            raise ConfigurationError("points_n must be at least 3")
        if self.tol_eps <= 0:
            raise ConfigurationError("tol_eps must be positive")
        if self.max_rounds < 1 or self.shrink_alpha <= 0:
            raise ConfigurationError("max_rounds and shrink_alpha must be positive")


@dataclass(frozen=True)
class SearchRound:
    eta_range: tuple
    etas: tuple
    values: tuple
    best_eta: float
    best_value: float


@dataclass
class SearchTrace:
    T: int
    algorithm: str
    rounds: list = field(default_factory=list)
    final_eta: float = float("nan")
    final_value: float = float("inf")
    solver_calls: int = 0

    def csv_row(self):
        return [self.T, self.algorithm, f"{self.final_eta:.17g}", f"{self.final_value:.17g}",
                self.solver_calls, len(self.rounds)]


class SearchError(RuntimeError):
    """An evaluator failure, annotated with the round it happened in."""


def reciprocal_grid(eta_min: float, eta_max: float, n: int) -> list:
    """``n`` stepsizes whose reciprocals are equally spaced, in increasing order."""
    if not (0 < eta_min < eta_max) or n < 2:
        raise ConfigurationError(f"invalid grid range [{eta_min}, {eta_max}] with n={n}")
    recip = np.linspace(1.0 / eta_min, 1.0 / eta_max, n)
    etas = 1.0 / recip
    etas[0], etas[-1] = eta_min, eta_max
    return etas.tolist()


def optimize_stepsize(T: int, algorithm: str, cfg: SearchConfig, evaluator: Callable[[float], float],
                      map_fn=map) -> SearchTrace:
    """Repeatedly evaluate a reciprocal grid and shrink the window around the best point.

    After each round the window becomes ``eta* -+ alpha * width / (n - 1)``,
    clipped below at a small positive floor, and the search stops once that
    window is narrower than ``tol_eps``.  Ties go to the smallest stepsize.
    A round whose values are all equal carries no direction, so the search
    stops there as well.  The best point seen so far is kept across rounds,
    so the reported value never gets worse.  ``map_fn`` may be a parallel map.
    """
    cache = {}
    trace = SearchTrace(int(T), algorithm)
    lo, hi = float(cfg.eta_min), float(cfg.eta_max)
    best_eta, best_val = float("nan"), float("inf")
    for r in range(cfg.max_rounds):
        etas = reciprocal_grid(lo, hi, cfg.points_n)
        todo = [e for e in dict.fromkeys(etas) if e not in cache]
        try:
            for e, v in zip(todo, map_fn(evaluator, todo)):
                cache[e] = float(v)
        except Exception as exc:
            raise SearchError(f"evaluation failed in round {r + 1} on [{lo}, {hi}]: {exc}") from exc
        trace.solver_calls += len(todo)
        vals = [cache[e] for e in etas]
        k = int(np.argmin(vals))
        round_eta, round_val = etas[k], vals[k]
        trace.rounds.append(SearchRound((lo, hi), tuple(etas), tuple(vals), round_eta, round_val))
        if round_val < best_val or (round_val == best_val and round_eta < best_eta):
            best_eta, best_val = round_eta, round_val
        if min(vals) == max(vals):
            break
        half = cfg.shrink_alpha * (hi - lo) / (cfg.points_n - 1)
        lo, hi = max(round_eta - half, ETA_FLOOR), round_eta + half
        if hi - lo <= cfg.tol_eps:
            break
    trace.final_eta, trace.final_value = best_eta, best_val
    return trace


def write_search_csv(traces, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["T", "algorithm", "eta_star", "value", "solver_calls", "rounds"])
        for tr in traces:
            w.writerow(tr.csv_row())
