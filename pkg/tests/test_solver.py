import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nheuler import scenarios
from nheuler.errors import DataError, InputError, PressureDivergenceError, VacuumError
from nheuler.solver import (
    SolverConfig, advection, compute_dX_usq, compute_dXu, compute_eta, compute_momentum, compute_pressure,
    compute_vorticity, compute_X, energy, eta_identity_residual, helmholtz_momentum, load_state,
    make_state, reconstruct_grad_u, rhs, run, save_state, solve_pressure_equation, step,
)
from nheuler.spectral import get_grid
from nheuler.suites import random_flow_state


def _vortex(g):
    x1, x2 = g.mesh
    return np.stack([-np.cos(x1) * np.sin(x2), np.sin(x1) * np.cos(x2)]) + \
        0.3 * np.stack([np.sin(2 * x2), np.zeros_like(x2)])


def test_make_state_projects_and_checks(g64):
    x1, x2 = g64.mesh
    u = np.stack([np.sin(x1), np.zeros_like(x1)])           # pure gradient part
    s = make_state(g64, np.ones((64, 64)), u)
    assert np.abs(s.u).max() <= 1e-14
    with pytest.raises(VacuumError):
        make_state(g64, np.cos(x1), u)
    with pytest.raises(InputError):
        make_state(g64, np.ones((64, 64)), u[0])
    with pytest.raises(InputError):
        make_state(g64, np.full((64, 64), np.nan), u)


def test_solver_config_validation():
    with pytest.raises(InputError):
        SolverConfig(cfl=0)
    with pytest.raises(InputError):
        SolverConfig(dt=-1.0)
    with pytest.raises(InputError):
        SolverConfig(cadence=0)


def test_pressure_homogeneous_matches_one_shot(g128):
    s = make_state(g128, np.ones((128, 128)), _vortex(g128))
    pi = compute_pressure(s)
    ref = g128.inv_lap(g128.div(advection(g128, s.u)))
    assert np.abs(pi - ref).max() <= 1e-10


def test_pressure_rest_state(g64):
    s = make_state(g64, 2 + 0.5 * np.sin(g64.mesh[0]), np.zeros((2, 64, 64)))
    assert np.abs(compute_pressure(s)).max() == 0.0


def test_manufactured_pressure(g128):
    x1, x2 = g128.mesh
    rho = 2 + 0.5 * np.sin(x1)
    pi_star = np.cos(x1) * np.cos(x2)
    G = -0.5 * np.cos(x1) * np.sin(x1) * np.cos(x2) / rho**2 + 2 * np.cos(x1) * np.cos(x2) / rho
    sol = solve_pressure_equation(g128, rho, G, tol=1e-12, max_iter=200)
    assert np.abs(sol.pi - pi_star).max() / np.abs(pi_star).max() <= 1e-8
    assert sol.iterations <= 200


def test_pressure_failures(g64):
    x1, x2 = g64.mesh
    rho = 1 + 0.9 * np.sin(x1)
    src = np.cos(x1) * np.cos(x2)
    with pytest.raises(PressureDivergenceError) as info:
        solve_pressure_equation(g64, rho, src, tol=1e-14, max_iter=2)
    assert info.value.iterations == 2 and info.value.residual > 1e-14
    with pytest.raises(VacuumError):
        solve_pressure_equation(g64, np.zeros((64, 64)), src)


def test_rhs_rest_states(g64):
    x1, _ = g64.mesh
    for rho in (np.ones((64, 64)), 2 + 0.5 * np.sin(x1)):
        drho, du = rhs(make_state(g64, rho, np.zeros((2, 64, 64))))
        assert np.abs(drho).max() == 0.0 and np.abs(du).max() == 0.0


def test_rhs_homogeneous_reduction(g64):
    s = make_state(g64, np.ones((64, 64)), _vortex(g64))
    drho, du = rhs(s)
    assert np.abs(drho).max() == 0.0
    assert np.abs(du + g64.leray(advection(g64, s.u))).max() <= 1e-12


def test_step_rest_state_fixed(g64):
    s = make_state(g64, 2 + 0.5 * np.sin(g64.mesh[0]), np.zeros((2, 64, 64)))
    s2 = step(s, SolverConfig(), dt=0.1)
    assert np.abs(s2.rho - s.rho).max() <= 1e-12 and np.abs(s2.u).max() <= 1e-12
    assert s2.t == pytest.approx(0.1)


def test_homogeneous_energy_conservation(g128):
    s = make_state(g128, np.ones((128, 128)), _vortex(g128))
    out = run(s, SolverConfig(), 1.0)
    assert out.ok
    assert abs(energy(out.final_state) - energy(s)) / energy(s) <= 1e-8


def test_derived_fields_constant_density(g64):
    s = make_state(g64, np.full((64, 64), 1.7), _vortex(g64))
    assert np.abs(compute_X(s)).max() == 0.0
    assert np.abs(compute_dXu(s)).max() == 0.0
    assert np.allclose(compute_eta(s), 1.7 * compute_vorticity(s), atol=1e-13)
    h = helmholtz_momentum(make_state(g64, np.ones((64, 64)), _vortex(g64)))
    assert np.abs(h.gradient).max() <= 1e-14
    rec = reconstruct_grad_u(make_state(g64, np.ones((64, 64)), _vortex(g64)))
    assert rec.discrepancy <= 1e-13


def test_derived_fields_rest(g64):
    s = make_state(g64, 2 + np.cos(g64.mesh[1]), np.zeros((2, 64, 64)))
    assert np.abs(compute_eta(s)).max() == 0.0 and np.abs(compute_momentum(s)).max() == 0.0
    h = helmholtz_momentum(s)
    assert np.abs(h.solenoidal).max() == 0.0 and np.abs(h.gradient).max() == 0.0
    assert np.abs(reconstruct_grad_u(s).reconstructed).max() == 0.0


def test_dXu_parallel_shear(g64):
    _, x2 = g64.mesh
    s = make_state(g64, 2 + np.cos(x2), np.stack([np.sin(x2), np.zeros_like(x2)]))
    assert np.allclose(compute_X(s), np.stack([np.sin(x2), np.zeros_like(x2)]), atol=1e-13)
    assert np.abs(compute_dXu(s)).max() <= 1e-13


@settings(max_examples=10, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), contrast=st.floats(1.0, 10.0))
def test_identities_on_random_states(seed, contrast):
    s = random_flow_state(128, np.random.default_rng(seed), contrast=contrast)
    scale = 1 + np.abs(s.u).max() * contrast
    assert eta_identity_residual(s) <= 1e-9 * scale
    assert helmholtz_momentum(s).residual <= 1e-9 * scale
    assert reconstruct_grad_u(s).discrepancy <= 1e-9 * scale
    lhs = (compute_dXu(s) * s.u).sum(axis=0)
    assert np.abs(s.grid.dealias(lhs) - 0.5 * compute_dX_usq(s)).max() <= 1e-9 * scale**2


def test_run_horizon_zero_and_callbacks(g64):
    s = scenarios.homogeneous_vortex(g64)
    seen = []
    out = run(s, SolverConfig(), 0.0, callbacks=[lambda st_, i: seen.append((st_.t, i))])
    assert out.steps == 0 and seen == [(0.0, 0)] and out.ok
    seen.clear()
    out = run(s, SolverConfig(cadence=3), 0.1, callbacks=[lambda st_, i: seen.append(i)])
    assert seen[0] == 0 and seen[-1] == out.steps and all(i % 3 == 0 for i in seen[1:-1])
    assert out.t == pytest.approx(0.1, abs=1e-14)


def test_blow_up_is_reported_not_silent(g64):
    s = scenarios.stratified_shear(g64)
    out = run(s, SolverConfig(grad_ceiling=0.5), 0.1)
    assert out.status == "blow_up" and "ceiling" in out.message
    assert np.all(np.isfinite(out.final_state.u))


def test_under_resolved_stratified_flags():
    g = get_grid(16)
    s = scenarios.stratified_shear(g, contrast=8.0, amplitude=4.0, perturbation=2.0)
    out = run(s, SolverConfig(cfl=0.9), 2.0)
    assert out.status == "blow_up" or out.warnings
    assert np.all(np.isfinite(out.final_state.u)) and np.all(np.isfinite(out.final_state.rho))


def test_pressure_divergence_status(g64):
    s = scenarios.density_patch_vortex(g64, contrast=5.0)
    out = run(s, SolverConfig(pressure_max_iter=1, pressure_tol=1e-14), 0.1)
    assert out.status == "pressure_divergence"


def test_checkpoint_roundtrip(tmp_path, g64):
    s = scenarios.density_patch_vortex(g64, coevolve=True)
    path = save_state(tmp_path / "s.npz", s)
    back = load_state(path)
    assert back.t == s.t and back.grid.n == 64 and back.coevolved
    for name in ("rho", "u", "X", "eta"):
        assert np.array_equal(getattr(back, name), getattr(s, name))
    with np.load(path) as data:
        meta = json.loads(bytes(data["meta"]).decode())
        assert meta["endianness"] == "little" and data["rho"].dtype.str == "<f8"


def test_checkpoint_corrupt(tmp_path):
    bad = tmp_path / "bad.npz"
    bad.write_bytes(b"not a checkpoint")
    with pytest.raises(DataError):
        load_state(bad)
    with pytest.raises(DataError):
        load_state(tmp_path / "missing.npz")


def test_scenarios_respect_density_bounds(g64):
    s = scenarios.stratified_shear(g64, contrast=3.0)
    assert s.rho.min() == pytest.approx(1.0, abs=1e-3) and s.rho.max() == pytest.approx(3.0, abs=1e-3)
    p = scenarios.density_patch_vortex(g64, contrast=2.0)
    assert 0.99 < p.rho.min() and p.rho.max() <= 2.0 + 1e-3
    with pytest.raises(InputError):
        scenarios.build_scenario("nope", g64)
    with pytest.raises(InputError):
        scenarios.build_scenario("homogeneous_vortex", g64, bogus=1)
    a = scenarios.homogeneous_vortex(g64, noise=0.1, seed=1)
    b = scenarios.homogeneous_vortex(g64, noise=0.1, seed=2)
    assert not np.array_equal(a.u, b.u)
    assert np.all(a.rho == 1.0)
