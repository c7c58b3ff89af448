import json

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from altgda.errors import ConfigurationError, ContractViolation, ScaleError
from altgda.game import (DISTRIBUTIONS, EquilibriumProfile, GameSpec, MixedStrategy, PayoffMatrix,
                         delta_margin, duality_gap, format_matrix, generate_game, load_matrix,
                         matching_pennies, parse_matrix, save_matrix, solve_equilibrium_max_support,
                         spectral_norm)

from conftest import random_simplex
from oracles import game_value_bruteforce, game_value_lp

finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)


# -- MixedStrategy ---------------------------------------------------------------

def test_strategy_clamps_dust():
    s = MixedStrategy([0.5, 0.5 + 5e-13, -5e-13])
    assert s.probs.min() == 0.0
    assert s.support == (0, 1)
    assert abs(s.probs.sum() - 1.0) <= 1e-15


@pytest.mark.parametrize("bad", [[0.5, 0.6], [1.1, -0.1], [np.nan, 1.0]])
def test_strategy_rejects_non_simplex(bad):
    with pytest.raises(ContractViolation):
        MixedStrategy(bad)


# -- spectral norm ---------------------------------------------------------------

def test_spectral_norm_examples(rps):
    assert spectral_norm(PayoffMatrix(np.zeros((3, 3)))) == 0.0
    assert spectral_norm(PayoffMatrix(np.eye(2))) == pytest.approx(1.0, rel=1e-12)
    # oracle: largest eigenvalue of A^T A from a symmetric eigendecomposition
    lam = np.linalg.eigvalsh(rps.entries.T @ rps.entries).max()
    assert spectral_norm(rps) == pytest.approx(np.sqrt(lam), rel=1e-10)
    assert spectral_norm(rps) == pytest.approx(np.sqrt(3.0), rel=1e-10)


@pytest.mark.parametrize("shape", [(1, 1), (5, 3), (40, 70), (200, 200)])
def test_spectral_norm_matches_eigen_oracle(shape):
    a = np.random.default_rng(sum(shape)).standard_normal(shape)
    lam = np.linalg.eigvalsh(a.T @ a if shape[0] >= shape[1] else a @ a.T).max()
    assert abs(spectral_norm(PayoffMatrix(a)) / np.sqrt(lam) - 1.0) <= 1e-10


# -- duality gap -----------------------------------------------------------------

def test_duality_gap_examples(rps):
    u = np.full(3, 1 / 3)
    assert duality_gap(rps, u, u) == pytest.approx(0.0, abs=1e-15)
    assert duality_gap(rps, [1, 0, 0], [0, 1, 0]) == pytest.approx(2.0)
    z = PayoffMatrix(np.zeros((2, 3)))
    assert duality_gap(z, [0.2, 0.3, 0.5], [0.9, 0.1]) == 0.0


def test_duality_gap_dimension_mismatch(rps):
    with pytest.raises(ContractViolation):
        duality_gap(rps, [0.5, 0.5], [1, 0, 0])


@given(arrays(float, (3, 4), elements=finite), st.integers(0, 2 ** 32 - 1))
def test_duality_gap_nonnegative(a, seed):
    rng = np.random.default_rng(seed)
    A = PayoffMatrix(a)
    for _ in range(20):
        assert duality_gap(A, random_simplex(rng, 4), random_simplex(rng, 3)) >= -1e-12


@given(arrays(float, (4, 3), elements=finite), st.integers(0, 2 ** 32 - 1))
def test_simplex_elementary_bounds(a, seed):
    rng = np.random.default_rng(seed)
    A = PayoffMatrix(a)
    nA = A.spectral_norm
    X = random_simplex(rng, 3, 200)
    Y = random_simplex(rng, 4, 200)
    X2 = random_simplex(rng, 3, 200)
    Y2 = random_simplex(rng, 4, 200)
    tol = 1e-9 * (1 + nA)
    assert np.all(np.linalg.norm(X - X2, axis=1) <= 2 + 1e-12)
    assert np.all(np.einsum("ij,ij->i", Y, X @ a.T) <= nA + tol)
    assert np.all(np.linalg.norm(Y @ a, axis=1) <= nA + tol)
    assert np.all(np.einsum("ij,ij->i", Y - Y2, (X - X2) @ a.T) <= 4 * nA + tol)


# -- equilibrium solver -----------------------------------------------------------

def test_rps_equilibrium(rps_profile):
    p = rps_profile
    assert np.allclose(p.x_star.probs, 1 / 3, atol=1e-12)
    assert np.allclose(p.y_star.probs, 1 / 3, atol=1e-12)
    assert p.nu_star == pytest.approx(0.0, abs=1e-12)
    assert p.is_interior
    assert p.delta == pytest.approx(1 / 3, abs=1e-12)


def test_matching_pennies():
    A = matching_pennies()
    p = solve_equilibrium_max_support(A)
    assert np.allclose(p.x_star.probs, 0.5) and np.allclose(p.y_star.probs, 0.5)
    assert p.nu_star == pytest.approx(0.0, abs=1e-12)
    assert delta_margin(A, p) == pytest.approx(0.5)


def test_noninterior_instance_matches_reported_equilibrium(game3_profile):
    p = game3_profile
    # the equilibrium reported for this experiment, to two decimals
    assert np.allclose(np.round(p.x_star.probs, 2), [0.0, 0.56, 0.44], atol=1e-12)
    assert np.allclose(np.round(p.y_star.probs, 2), [0.37, 0.63, 0.0], atol=1e-12)
    assert not p.is_interior
    assert p.support_x == (1, 2) and p.support_y == (0, 1)


def test_noninterior_delta_term_by_term(game3, game3_profile):
    """Evaluate the four margin terms directly from their definition."""
    a, p = game3.entries, game3_profile
    x, y, nu = p.x_star.probs, p.y_star.probs, p.nu_star
    nA = game3.spectral_norm
    off_x = [i for i in range(3) if i not in p.support_x]
    off_y = [j for j in range(3) if j not in p.support_y]
    terms = [x[list(p.support_x)].min(), y[list(p.support_y)].min(),
             min((a.T @ y)[i] - nu for i in off_x) / nA,
             min(nu - (a @ x)[j] for j in off_y) / nA]
    assert p.delta > 0
    assert p.delta == pytest.approx(min(terms), abs=1e-10)
    assert delta_margin(game3, p) == pytest.approx(p.delta, abs=1e-12)
    # frozen value for regression
    assert p.delta == pytest.approx(0.0158927, abs=1e-6)
    assert p.nu_star == pytest.approx(0.155977, abs=1e-6)


def test_zero_game_delta_is_min_support_probability():
    A = PayoffMatrix(np.zeros((2, 3)))
    p = solve_equilibrium_max_support(A)
    assert p.is_interior
    assert delta_margin(A, p) == pytest.approx(min(p.x_star.probs.min(), p.y_star.probs.min()))


def test_profile_rejects_non_equilibrium(rps):
    with pytest.raises(ContractViolation):
        EquilibriumProfile.from_strategies(rps, [1, 0, 0], [0, 1, 0])


def test_scale_guard():
    with pytest.raises(ScaleError):
        solve_equilibrium_max_support(PayoffMatrix(np.ones((13, 2))))


@pytest.mark.parametrize("seed", range(40))
@pytest.mark.parametrize("shape", [(2, 2), (3, 3)])
def test_equilibrium_matches_bruteforce(seed, shape):
    a = np.random.default_rng(1000 * shape[0] + seed).standard_normal(shape)
    p = solve_equilibrium_max_support(PayoffMatrix(a))
    vert, grid = game_value_bruteforce(a)
    assert p.nu_star == pytest.approx(vert, abs=1e-6)
    assert vert <= grid + 1e-12
    assert duality_gap(PayoffMatrix(a), p.x_star, p.y_star) <= 1e-9


def test_max_support_is_selected():
    # every mixture of the first two columns is optimal for x; max support keeps both
    a = np.array([[1.0, 1.0, 3.0], [0.0, 0.0, -2.0]])
    p = solve_equilibrium_max_support(PayoffMatrix(a))
    v, _ = game_value_lp(a)
    assert p.nu_star == pytest.approx(v, abs=1e-9)
    assert set(p.support_x) >= {0, 1}


# -- generation and serialization -----------------------------------------------------

def test_generate_deterministic_and_distinct():
    s = GameSpec(10, 20, "normal", 7)
    assert np.array_equal(generate_game(s).entries, generate_game(s).entries)
    assert not np.array_equal(generate_game(s).entries, generate_game(GameSpec(10, 20, "normal", 8)).entries)


def test_generate_supports():
    u = generate_game(GameSpec(10, 20, "uniform01", 1)).entries
    assert u.min() >= 0 and u.max() <= 1
    r = generate_game(GameSpec(50, 50, "randint", 1)).entries
    assert set(np.unique(r)) <= set(range(-10, 11)) and r.min() == -10 and r.max() == 10
    b = generate_game(GameSpec(100, 100, "binary", 3)).entries
    assert set(np.unique(b)) == {0.0, 1.0}
    assert 0.78 <= np.mean(b == 0) <= 0.82
    assert generate_game(GameSpec(20, 20, "lognormal", 1)).entries.min() > 0
    assert generate_game(GameSpec(20, 20, "exponential", 1)).entries.min() >= 0


def test_explicit_passthrough():
    e = [[0.1, 0.2], [0.3, 1e-17]]
    assert np.array_equal(generate_game(GameSpec(2, 2, "explicit", explicit_entries=e)).entries, e)


def test_unknown_distribution():
    with pytest.raises(ConfigurationError):
        GameSpec(2, 2, "cauchy")


def test_gamespec_json_roundtrip():
    s = GameSpec(3, 4, "binary", 2 ** 63)
    d = json.loads(s.to_json())
    assert d == {"m": 3, "n": 4, "distribution": "binary", "seed": 2 ** 63}
    assert GameSpec.from_json(s.to_json()) == s


@given(arrays(float, st.tuples(st.integers(1, 5), st.integers(1, 5)),
              elements=st.floats(allow_nan=False, allow_infinity=False, width=64)))
def test_matrix_text_roundtrip_bit_exact(a):
    A = PayoffMatrix(a)
    B = parse_matrix(format_matrix(A))
    assert np.array_equal(A.entries, B.entries)


def test_matrix_file_roundtrip(tmp_path):
    A = generate_game(GameSpec(4, 6, "lognormal", 3))
    save_matrix(A, tmp_path / "g.txt")
    assert (tmp_path / "g.txt").read_text().splitlines()[0] == "4 6"
    assert np.array_equal(load_matrix(tmp_path / "g.txt").entries, A.entries)


def test_all_distributions_named():
    assert set(DISTRIBUTIONS) == {"uniform01", "randint", "binary", "normal", "lognormal",
                                  "exponential", "explicit"}
