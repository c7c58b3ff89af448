import numpy as np
import pytest

from altgda.dynamics import RunConfig, local_regions, run, sample_init_in_S0
from altgda.invariants import (StepData, audit_trace, check_decay_identity, check_energy_decay,
                               check_projection_properties, check_residual_sandwich)

E1, E2 = [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]


def _by_name(results):
    return {r.name: r for r in results}


def test_audit_rps_below_interior_bound(rps, rps_profile):
    tr = run(rps, RunConfig(0.1, 3000, E1, E2, reference=rps_profile, store_iterates=True))
    res = audit_trace(rps, tr, probes=30, probe_steps=300)
    assert all(r.passed for r in res), [r.line() for r in res if not r.passed]
    names = _by_name(res)
    for key in ("energy decay E_{t+1} <= E_t", "energy decay identity",
                "residual sandwich 0 <= r_t <= E_t - E_{t+1}",
                "averaged duality gap below the rate bound (interior)"):
        assert names[key].asserted and names[key].n_checked > 0


def test_audit_rps_above_interior_bound(rps, rps_profile):
    tr = run(rps, RunConfig(1.0, 1000, E1, E2, reference=rps_profile, store_iterates=True))
    names = _by_name(audit_trace(rps, tr, probes=30, probe_steps=300))
    assert not names["energy decay E_{t+1} <= E_t"].asserted
    assert names["descent inequality (phi, t >= 0)"].asserted
    assert names["descent inequality (phi, t >= 0)"].passed
    assert names["descent inequality (psi, t >= 1)"].passed
    assert all(r.passed for r in names.values())


def test_audit_noninterior_local_run(game3, game3_profile):
    eta = 0.5 / game3.spectral_norm
    params = local_regions(game3, eta, game3_profile)
    x0, y0 = sample_init_in_S0(params, game3_profile, 1)
    tr = run(game3, RunConfig(eta, 5000, x0, y0, reference=game3_profile, store_iterates=True))
    names = _by_name(audit_trace(game3, tr, probes=20, probe_steps=200))
    assert all(r.passed for r in names.values()), [r.line() for r in names.values() if not r.passed]
    for key in ("trajectory from S0 stays in S", "local separation inside S",
                "cumulative V increase (telescoped)", "cumulative V increase (inner-product sums)",
                "cumulative V increase (positive parts)", "averaged duality gap below the rate bound (local)"):
        assert names[key].asserted


def test_audit_noninterior_off_regime(game3, game3_profile):
    u = np.full(3, 1 / 3)
    tr = run(game3, RunConfig(0.01, 2000, u, u, reference=game3_profile, store_iterates=True))
    names = _by_name(audit_trace(game3, tr, probes=20, probe_steps=200))
    assert not names["energy decay E_{t+1} <= E_t"].asserted
    assert not names["trajectory from S0 stays in S"].asserted
    assert names["variant energy change V_{t+1} - V_t <= -eta<gamma, x-x*> - eta<lambda, y-y*>"].passed


def test_checkers_detect_corruption(rps, rps_profile):
    """Mutations of the stored quantities must turn checks red."""
    tr = run(rps, RunConfig(0.1, 200, E1, E2, reference=rps_profile, store_iterates=True))
    sd = StepData(rps, tr)
    assert check_energy_decay(sd).passed and check_residual_sandwich(sd).passed
    sd.E = sd.E.copy()
    sd.E[50] += 1e-6
    assert not check_energy_decay(sd).passed
    sd = StepData(rps, tr)
    sd.residual = sd.residual.copy()
    sd.residual[10] = -1e-6
    assert not check_residual_sandwich(sd).passed
    sd = StepData(rps, tr)
    assert check_decay_identity(sd).passed
    sd.E = sd.E + 1e-6 * np.arange(sd.E.size)
    assert not check_decay_identity(sd).passed


def test_projection_property_checker():
    res = check_projection_properties(np.random.default_rng(0), n_vectors=2000)
    assert all(r.passed and r.n_checked == 2000 for r in res)


def test_stepdata_requires_iterates(rps):
    tr = run(rps, RunConfig(0.1, 10, E1, E2))
    with pytest.raises(ValueError):
        StepData(rps, tr)
