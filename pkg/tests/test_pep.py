import os
import sys
import textwrap

import numpy as np
import pytest

from altgda.errors import CertificateRejected, ConfigurationError, ReconstructionFailed, SolverError
from altgda.game import PayoffMatrix, duality_gap
from altgda.pep.basis import PepSpec, build_selection_basis
from altgda.pep.reconstruct import factor_gram, gram_from_run, reconstruct_worst_case
from altgda.pep.sdp import assemble_pep_sdp, lift_grams, reduce_instance, verify_certificate
from altgda.pep.sdpa import SdpaProblem, export_sdpa, instance_to_sdpa
from altgda.pep.solver import ENV_VAR, ExternalSolver, bundled_solver, resolve_solver, solve_pep

from conftest import random_simplex


def planted_game():
    a = np.array([[0.6, -0.3], [-0.2, 0.5]])
    return PayoffMatrix(a * 0.95 / np.linalg.norm(a, 2))


# -- selection basis -----------------------------------------------------------

def test_basis_dimensions():
    B = build_selection_basis(PepSpec("altgda", 5, 1.0))
    assert B.ambient_dim == 16
    assert B.x_tilde.shape == (16, 7) and B.q_bar.shape == (16, 7)


def test_basis_first_step_by_hand():
    eta = 0.7
    B = build_selection_basis(PepSpec("altgda", 1, eta))
    e = np.eye(8)
    # one-based: e_2 - e_5 - eta e_7
    assert np.array_equal(B.x(1), e[1] - e[4] - eta * e[6])
    assert np.array_equal(B.y(1), e[1] - e[4] + eta * e[7])
    assert np.array_equal(B.x(-1), e[0]) and np.array_equal(B.x(0), e[1])
    S = build_selection_basis(PepSpec("simgda", 1, eta))
    assert np.array_equal(S.y(1), e[1] - e[4] + eta * e[6])


def test_basis_zero_stepsize_only_moves_by_subgradients():
    B = build_selection_basis(PepSpec("altgda", 4, 0.0))
    for i in range(1, 5):
        assert np.array_equal(B.x(i), B.x(i - 1) - B.g(i))


@pytest.mark.parametrize("alg", ["altgda", "simgda"])
def test_basis_recursion(alg):
    eta = 1.3
    B = build_selection_basis(PepSpec(alg, 6, eta))
    for i in range(1, 7):
        assert np.allclose(B.x(i), B.x(i - 1) - B.g(i) - eta * B.q(i - 1))
        ascent = B.p(i) if alg == "altgda" else B.p(i - 1)
        assert np.allclose(B.y(i), B.y(i - 1) - B.gy(i) + eta * ascent)


def test_spec_validation():
    for bad in (("gda", 3, 1.0), ("altgda", 0, 1.0), ("altgda", 3, -1.0), ("altgda", 3, np.nan)):
        with pytest.raises(ConfigurationError):
            PepSpec(*bad)


# -- assembly ------------------------------------------------------------------

def test_assembly_counts_small():
    inst = assemble_pep_sdp(PepSpec("altgda", 2, 1.0))
    labels = inst.ineq_labels
    assert sum(lab.startswith("interp_") for lab in labels) == 32
    assert sum(lab.startswith("radius_") for lab in labels) == 8
    assert inst.n_eq == 16
    assert [m.order for m in inst.psd_maps] == [4, 4]


def test_objective_is_symmetric():
    inst = assemble_pep_sdp(PepSpec("simgda", 3, 0.5))
    N = inst.gram_order
    for c in (inst.obj_x, inst.obj_y):
        C = c.reshape(N, N)
        assert np.array_equal(C, C.T)


def test_zero_grams_are_feasible():
    inst = assemble_pep_sdp(PepSpec("altgda", 3, 1.0))
    z = np.zeros((inst.gram_order,) * 2)
    sol = verify_certificate(inst, z, z)
    assert sol.accepted and sol.objective_value == 0.0


@pytest.mark.parametrize("alg", ["altgda", "simgda"])
@pytest.mark.parametrize("seed", range(5))
def test_actual_runs_are_feasible_with_their_gap(alg, seed):
    """Lifting a real run gives a feasible point whose objective is its averaged gap."""
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((3, 4))
    A = PayoffMatrix(a / np.linalg.norm(a, 2))
    spec = PepSpec(alg, 4, 1.2)
    gx, gy, xs, ys = gram_from_run(A, spec, random_simplex(rng, 4), random_simplex(rng, 3))
    sol = verify_certificate(assemble_pep_sdp(spec), gx, gy, tol=1e-9)
    assert sol.accepted, sol.summary()
    gap = duality_gap(A, xs[1:].mean(axis=0), ys[1:].mean(axis=0))
    assert sol.objective_value == pytest.approx(gap, abs=1e-12)


def test_verifier_flags_perturbation():
    A = planted_game()
    spec = PepSpec("altgda", 3, 1.0)
    gx, gy, _, _ = gram_from_run(A, spec, [0.8, 0.2], [0.3, 0.7])
    inst = assemble_pep_sdp(spec)
    assert verify_certificate(inst, gx, gy).accepted
    bad = gx.copy()
    # <x_{-1}, q_T> enters a coupling equality
    bad[0, -1] += 1e-3
    bad[-1, 0] += 1e-3
    rep = verify_certificate(inst, bad, gy)
    assert not rep.accepted and rep.max_eq_residual >= 1e-3 - 1e-12


def test_verifier_detects_indefinite_gram():
    inst = assemble_pep_sdp(PepSpec("altgda", 1, 1.0))
    g = np.zeros((inst.gram_order,) * 2)
    g[0, 1] = g[1, 0] = 1e-3
    sol = verify_certificate(inst, g, np.zeros_like(g))
    assert sol.min_eigenvalue <= -1e-3 + 1e-15 and not sol.accepted


def test_reduction_preserves_objective_and_feasibility():
    A = planted_game()
    spec = PepSpec("altgda", 4, 1.1)
    inst = assemble_pep_sdp(spec)
    red, keep = reduce_instance(inst)
    assert red.gram_order == inst.gram_order - 2
    gx, gy, _, _ = gram_from_run(A, spec, [0.8, 0.2], [0.3, 0.7])
    # the run has no subgradients at i = -1, 0, so those slots are already zero
    rx, ry = gx[np.ix_(keep, keep)], gy[np.ix_(keep, keep)]
    full = verify_certificate(inst, *lift_grams(inst.gram_order, keep, rx, ry))
    part = verify_certificate(red, rx, ry)
    assert full.accepted and part.accepted
    assert full.objective_value == pytest.approx(part.objective_value, abs=1e-14)
    assert red.n_ineq < inst.n_ineq


# -- SDPA export ---------------------------------------------------------------

def test_sdpa_round_trip_toy(tmp_path):
    prob = SdpaProblem(np.array([1.0, -2.5]), [2, -1], np.array([0, 1, 2, 2]), np.array([1, 1, 1, 2]),
                       np.array([1, 1, 1, 1]), np.array([1, 2, 2, 1]), np.array([1.0, 0.5, 1e-17, 3.0]))
    prob.write(tmp_path / "toy.dat-s")
    back = SdpaProblem.read(tmp_path / "toy.dat-s")
    assert back.blocks == [2, -1]
    for f in ("c", "mat", "blk", "row", "col", "val"):
        assert np.array_equal(getattr(back, f), getattr(prob, f)), f


def test_sdpa_dimensions_small(tmp_path):
    inst = assemble_pep_sdp(PepSpec("altgda", 2, 1.0))
    prob, _ = instance_to_sdpa(inst)
    assert prob.m == 76
    assert prob.blocks == [10, 10, 4, 4, -40]
    manifest = export_sdpa(inst, tmp_path / "p.dat-s")
    assert (tmp_path / "p.dat-s.json").exists()
    assert manifest["algorithm"] == "altgda" and manifest["T"] == 2 and manifest["eta"] == 1.0
    assert manifest["block_map"]["1"] == "gram_x" and manifest["block_map"]["5"] == "inequality_slack"
    back = SdpaProblem.read(tmp_path / "p.dat-s")
    assert back.m == 76 and np.allclose(back.val, prob.val, rtol=0, atol=0)


# -- reconstruction ------------------------------------------------------------

def test_factor_gram_reproduces_inner_products():
    rng = np.random.default_rng(3)
    H = rng.standard_normal((3, 7))
    G = H.T @ H
    F = factor_gram(G)
    assert F.shape[0] == 3
    assert np.allclose(F.T @ F, G, atol=1e-12)
    with pytest.raises(ReconstructionFailed):
        factor_gram(-np.eye(3))


def test_planted_reconstruction():
    A = planted_game()
    spec = PepSpec("altgda", 5, 1.0)
    gx, gy, xs, ys = gram_from_run(A, spec, [0.8, 0.2], [0.3, 0.7])
    target = duality_gap(A, xs[1:].mean(axis=0), ys[1:].mean(axis=0))
    wc = reconstruct_worst_case(spec, gx, gy, target)
    assert wc.max_iterate_error <= 1e-4
    assert abs(wc.replay_objective - target) <= 1e-3
    assert np.linalg.norm(wc.A.entries, 2) <= 1 + 1e-6
    assert np.linalg.norm(wc.x_star) <= 1 + 1e-6 and np.linalg.norm(wc.y_star) <= 1 + 1e-6
    B = build_selection_basis(spec)
    assert np.allclose(wc.x_points.T @ wc.x_points, B.x_tilde.T @ gx @ B.x_tilde, atol=1e-9)
    assert np.allclose(wc.y_points.T @ wc.y_points, B.y_tilde.T @ gy @ B.y_tilde, atol=1e-9)


def test_reconstruction_reports_objective_mismatch():
    A = planted_game()
    spec = PepSpec("altgda", 3, 1.0)
    gx, gy, _, _ = gram_from_run(A, spec, [0.8, 0.2], [0.3, 0.7])
    with pytest.raises(ReconstructionFailed):
        reconstruct_worst_case(spec, gx, gy, objective_value=5.0)


# -- solver contract -----------------------------------------------------------

@pytest.mark.solver
@pytest.mark.parametrize("alg", ["altgda", "simgda"])
def test_bundled_solution_dominates_actual_runs(alg):
    spec = PepSpec(alg, 2, 1.0)
    sol = solve_pep(spec, bundled_solver(timeout=300))
    assert sol.accepted
    rng = np.random.default_rng(11)
    for _ in range(20):
        a = rng.standard_normal((3, 3))
        A = PayoffMatrix(a / np.linalg.norm(a, 2))
        _, _, xs, ys = gram_from_run(A, spec, random_simplex(rng, 3), random_simplex(rng, 3))
        assert duality_gap(A, xs[1:].mean(axis=0), ys[1:].mean(axis=0)) <= sol.objective_value + 1e-6


@pytest.mark.solver
def test_bundled_value_monotone_in_horizon():
    s = bundled_solver(timeout=300)
    v1 = solve_pep(PepSpec("altgda", 1, 1.0), s).objective_value
    v2 = solve_pep(PepSpec("altgda", 2, 1.0), s).objective_value
    assert v1 > 0 and v2 > 0
    # the full-run solution reduced to the unreduced instance agrees
    v2_full = solve_pep(PepSpec("altgda", 2, 1.0), s, reduce=False).objective_value
    assert v2_full == pytest.approx(v2, abs=1e-4)


def test_missing_solver_command():
    with pytest.raises(SolverError):
        solve_pep(PepSpec("altgda", 1, 1.0), ExternalSolver(("/nonexistent/sdp-solver",), 10))


def test_solver_without_output():
    with pytest.raises(SolverError):
        solve_pep(PepSpec("altgda", 1, 1.0), ExternalSolver((sys.executable, "-c", "pass"), 30))


def test_infeasible_solver_output_is_rejected(tmp_path):
    script = tmp_path / "liar.py"
    script.write_text(textwrap.dedent("""
        import sys
        import numpy as np
        from altgda.pep.conic_adapter import write_csdp_solution
        from altgda.pep.sdpa import SdpaProblem
        prob = SdpaProblem.read(sys.argv[1])
        mats = [10 * np.eye(b) if b > 0 else np.ones(-b) for b in prob.blocks]
        write_csdp_solution(sys.argv[2], mats, np.zeros(prob.m))
    """))
    with pytest.raises(CertificateRejected) as exc:
        solve_pep(PepSpec("altgda", 1, 1.0), ExternalSolver((sys.executable, str(script)), 60))
    assert exc.value.report is not None and not exc.value.report.accepted


def test_resolve_solver_precedence(monkeypatch):
    monkeypatch.delenv(ENV_VAR, raising=False)
    with pytest.raises(ConfigurationError):
        resolve_solver(None)
    assert resolve_solver("csdp").command == ("csdp",)
    assert resolve_solver("bundled") == bundled_solver()
    monkeypatch.setenv(ENV_VAR, "sdpa -p")
    assert resolve_solver("csdp").command == ("sdpa", "-p")
    assert os.environ[ENV_VAR] == "sdpa -p"
