import numpy as np
import pytest
from hypothesis import given, strategies as st

from altgda.errors import ConfigurationError
from altgda.search import (ETA_FLOOR, SearchConfig, SearchError, optimize_stepsize, reciprocal_grid,
                           write_search_csv)


class Counting:
    def __init__(self, f):
        self.f, self.calls = f, []

    def __call__(self, eta):
        self.calls.append(eta)
        return self.f(eta)


def test_reciprocal_grid_examples():
    assert reciprocal_grid(0.5, 2.0, 3) == pytest.approx([0.5, 0.8, 2.0], abs=1e-15)
    assert reciprocal_grid(0.5, 2.0, 2) == [0.5, 2.0]


@given(st.floats(1e-3, 10), st.floats(1.01, 50), st.integers(2, 40))
def test_reciprocal_grid_properties(lo, ratio, n):
    hi = lo * ratio
    g = np.array(reciprocal_grid(lo, hi, n))
    assert g[0] == lo and g[-1] == hi and g.size == n
    assert np.all(np.diff(g) > 0)
    if n > 2:
        assert np.all(np.diff(np.diff(g)) > -1e-12 * hi)
    assert np.allclose(np.diff(1 / g), (1 / hi - 1 / lo) / (n - 1), rtol=1e-9, atol=1e-12 / lo)


@pytest.mark.parametrize("args", [(0.0, 1.0, 5), (2.0, 1.0, 5), (1.0, 1.0, 5), (0.5, 1.0, 1)])
def test_reciprocal_grid_rejects(args):
    with pytest.raises(ConfigurationError):
        reciprocal_grid(*args)


@pytest.mark.parametrize("kw", [dict(eta_min=1.0, eta_max=0.5), dict(eta_min=0.1, eta_max=1.0, points_n=2),
                                dict(eta_min=0.1, eta_max=1.0, tol_eps=0.0),
                                dict(eta_min=0.1, eta_max=1.0, max_rounds=0),
                                dict(eta_min=0.1, eta_max=1.0, shrink_alpha=0.0)])
def test_config_validation(kw):
    with pytest.raises(ConfigurationError):
        SearchConfig(**kw)


def test_constant_evaluator_stops_after_one_round():
    ev = Counting(lambda e: 1.0)
    tr = optimize_stepsize(5, "altgda", SearchConfig(0.5, 2.0, points_n=7), ev)
    assert len(tr.rounds) == 1 and tr.solver_calls == 7
    assert tr.final_eta == 0.5 and tr.final_value == 1.0


@pytest.mark.parametrize("center", [0.37, 0.81, 1.2345])
def test_quadratic_minimum_found(center):
    ev = Counting(lambda e: (e - center) ** 2 + 0.25)
    cfg = SearchConfig(0.2, 2.5, points_n=11, tol_eps=1e-4)
    tr = optimize_stepsize(3, "simgda", cfg, ev)
    assert abs(tr.final_eta - center) <= 1e-4
    assert tr.final_value == pytest.approx(0.25, abs=1e-8)
    # memoized: no stepsize is evaluated twice
    assert len(ev.calls) == len(set(ev.calls)) == tr.solver_calls
    assert tr.solver_calls <= cfg.points_n * len(tr.rounds)
    best = [r.best_value for r in tr.rounds]
    assert tr.final_value == min(best)
    lo, hi = tr.rounds[-1].eta_range
    half = cfg.shrink_alpha * (hi - lo) / (cfg.points_n - 1)
    assert 2 * half <= cfg.tol_eps or len(tr.rounds) == cfg.max_rounds


def test_sparse_end_refines_locally():
    """With alpha = 1 the centered window can drop the true minimum when it
    lies where the reciprocal grid is sparse; the search is then local but
    still never reports anything worse than its first round."""
    f = lambda e: (e - 1.9) ** 2 + 0.25
    tr = optimize_stepsize(3, "simgda", SearchConfig(0.2, 2.5, points_n=11, tol_eps=1e-4), f)
    assert tr.final_value <= tr.rounds[0].best_value
    assert f(tr.final_eta) == tr.final_value
    wide = optimize_stepsize(3, "simgda", SearchConfig(0.2, 2.5, points_n=11, shrink_alpha=3.0,
                                                       tol_eps=1e-4), f)
    assert abs(wide.final_eta - 1.9) <= 1e-4


def test_incumbent_kept_and_nonincreasing():
    # a sawtooth makes later rounds land on worse local points
    f = lambda e: abs(np.sin(25 * e)) + 0.1 * e
    tr = optimize_stepsize(1, "altgda", SearchConfig(0.1, 2.0, points_n=5, shrink_alpha=2.0), f)
    running = np.minimum.accumulate([r.best_value for r in tr.rounds])
    assert tr.final_value == running[-1]
    assert f(tr.final_eta) == tr.final_value


def test_window_respects_floor():
    tr = optimize_stepsize(1, "altgda", SearchConfig(1e-5, 1.0, points_n=4, tol_eps=1e-9, max_rounds=6),
                           lambda e: e)
    assert all(r.eta_range[0] >= ETA_FLOOR for r in tr.rounds[1:])
    assert tr.final_eta == min(min(r.etas) for r in tr.rounds)


def test_ties_go_to_smallest_stepsize():
    tr = optimize_stepsize(1, "altgda", SearchConfig(0.5, 2.0, points_n=5, max_rounds=1),
                           lambda e: 0.0 if e > 0.6 else 1.0)
    assert tr.final_eta == tr.rounds[0].etas[1]


def test_parallel_map_matches_serial():
    f = lambda e: (e - 1.1) ** 2
    cfg = SearchConfig(0.5, 2.0, points_n=6)
    a = optimize_stepsize(2, "altgda", cfg, f)
    b = optimize_stepsize(2, "altgda", cfg, f, map_fn=lambda g, xs: list(map(g, reversed(xs)))[::-1])
    assert (a.final_eta, a.final_value, a.solver_calls) == (b.final_eta, b.final_value, b.solver_calls)


def test_evaluator_failure_is_wrapped():
    def boom(e):
        raise RuntimeError("solver died")
    with pytest.raises(SearchError, match="round 1"):
        optimize_stepsize(1, "altgda", SearchConfig(0.5, 2.0), boom)


def test_csv(tmp_path):
    tr = optimize_stepsize(4, "altgda", SearchConfig(0.5, 2.0, points_n=5), lambda e: (e - 1) ** 2)
    write_search_csv([tr], tmp_path / "s.csv")
    lines = (tmp_path / "s.csv").read_text().splitlines()
    assert lines[0] == "T,algorithm,eta_star,value,solver_calls,rounds"
    fields = lines[1].split(",")
    assert fields[0] == "4" and fields[1] == "altgda" and float(fields[2]) == tr.final_eta
