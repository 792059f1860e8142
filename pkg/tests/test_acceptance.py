"""Acceptance criteria, one test per criterion.

Each test prints a single ``[PASS]``/``[FAIL]`` line; the lines are repeated in
the "acceptance criteria" section at the end of the pytest run.  Run just this
module with ``pytest tests/test_acceptance.py -v``.
"""

import math
import time

import numpy as np
import pytest

from nheuler import scenarios
from nheuler.diagnostics import DiagnosticSeries
from nheuler.littlewood_paley import get_partition
from nheuler.paraproduct import bony_decompose
from nheuler.solver import (
    SolverConfig, advection, compute_eta, compute_pressure, compute_X, energy, eta_identity_residual,
    helmholtz_momentum, make_state, reconstruct_grad_u, run, solve_pressure_equation, step,
)
from nheuler.spectral import get_grid
from nheuler.suites import inequality_constants, pair_ensemble, random_flow_state
from nheuler.transport import ramped_shear_family


def test_c01_identities(acceptance):
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    worst = {"eta": 0.0, "helmholtz": 0.0, "grad_u": 0.0}
    for _ in range(20):
        s = random_flow_state(128, rng)
        worst["eta"] = max(worst["eta"], eta_identity_residual(s))
        worst["helmholtz"] = max(worst["helmholtz"], helmholtz_momentum(s).residual)
        worst["grad_u"] = max(worst["grad_u"], reconstruct_grad_u(s).discrepancy)
    dt = time.perf_counter() - t0
    ok = max(worst.values()) <= 1e-8 and dt <= 60
    detail = ", ".join(f"{k} {v:.2e}" for k, v in worst.items()) + f" (tol 1e-8, {dt:.1f}s)"
    assert acceptance(1, "identity suite", ok, detail)


def test_c02_conservation(acceptance):
    g = get_grid(128)
    t0 = time.perf_counter()
    lines, ok = [], True
    for name in ("homogeneous_vortex", "stratified_shear"):
        s0 = scenarios.build_scenario(name, g)
        e0, lo0, hi0 = energy(s0), s0.rho.min(), s0.rho.max()
        div_max = [0.0]

        def watch(s, i):
            div_max[0] = max(div_max[0], float(np.abs(g.div(s.u)).max()))

        out = run(s0, SolverConfig(), 1.0, callbacks=[watch])
        f = out.final_state
        de = abs(energy(f) - e0) / e0
        drho = max(abs(f.rho.min() - lo0) / lo0, abs(f.rho.max() - hi0) / hi0)
        ok &= out.ok and de <= 1e-6 and drho <= 1e-6 and div_max[0] <= 1e-8
        lines.append(f"{name}: energy {de:.1e}, rho range {drho:.1e}, div {div_max[0]:.1e}")
    dt = time.perf_counter() - t0
    ok &= dt <= 300
    assert acceptance(2, "conservation suite", ok, "; ".join(lines) + f" ({dt:.1f}s)")


def _homogeneous_reference(g, u, dt, nsteps):
    """Constant-density Euler with the pressure from a single inverse Laplacian."""

    def rate(u):
        F = advection(g, u)
        return -F - g.grad(g.inv_lap(g.div(F)))

    for _ in range(nsteps):
        k1 = rate(u)
        k2 = rate(u + dt / 2 * k1)
        k3 = rate(u + dt / 2 * k2)
        k4 = rate(u + dt * k3)
        u = u + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    return u


def test_c03_homogeneous_regression(acceptance):
    g = get_grid(128)
    s0 = scenarios.homogeneous_vortex(g)
    dt, T = 0.01, 0.5
    series = DiagnosticSeries()
    out = run(s0, SolverConfig(dt=dt), T, callbacks=[series])
    u_ref = _homogeneous_reference(g, s0.u, dt, out.steps)
    pi_ref = g.inv_lap(g.div(advection(g, u_ref)))
    du = float(np.abs(out.final_state.u - u_ref).max())
    dpi = float(np.abs(compute_pressure(out.final_state) - pi_ref).max())
    zero = all(getattr(r, c) == 0.0 for r in series.records for c in ("dXu_inf", "dXu_b0", "dX_usq_b0"))
    ok = du <= 1e-9 and dpi <= 1e-9 and zero and abs(out.t - T) < 1e-12
    detail = f"|u - u_ref| {du:.1e}, |Pi - Pi_ref| {dpi:.1e} at T={out.t:g}; d_X diagnostics exactly 0: {zero}"
    assert acceptance(3, "homogeneous regression", ok, detail)


def test_c04_bony(acceptance):
    g = get_grid(128)
    recon, symmetric = 0.0, True
    for u, v in pair_ensemble(128, 50, seed=7, kmax=42):
        b = bony_decompose(u, v)
        recon = max(recon, float(np.abs(b.total().values - g.mul(u.values, v.values)).max()))
        symmetric &= bool(np.array_equal(b.R_uv.values, bony_decompose(v, u).R_uv.values))
    ok = recon <= 1e-10 and symmetric
    assert acceptance(4, "Bony reconstruction", ok, f"max error {recon:.1e} (tol 1e-10), R symmetric: {symmetric}")


def test_c05_partition(acceptance):
    part = get_partition(128)
    g = part.grid
    pou = float(np.abs(part.table.sum(axis=0) - 1)[g.kmag <= g.n / 2].max())
    dis = max(float(np.abs(part.table[a] * part.table[b]).max())
              for a in range(len(part.indices)) for b in range(a + 2, len(part.indices)))
    ok = pou <= 1e-12 and dis <= 1e-12
    assert acceptance(5, "Littlewood-Paley partition", ok, f"unity error {pou:.1e}, overlap |j-k|>=2 {dis:.1e}")


def test_c06_inequality_ensembles(acceptance):
    t0 = time.perf_counter()
    consts = {n: inequality_constants(n, size=100, seed=0) for n in (64, 128, 256)}
    spreads = {}
    finite = True
    for name in consts[128]:
        vals = [consts[n][name] for n in consts]
        finite &= all(math.isfinite(v) and v > 0 for v in vals)
        spreads[name] = max(vals) / min(vals)
    dt = time.perf_counter() - t0
    worst = max(spreads, key=spreads.get)
    ok = finite and spreads[worst] <= 2.0 and dt <= 600
    detail = f"{len(spreads)} inequalities finite: {finite}; widest spread {spreads[worst]:.3f} ({worst}); {dt:.0f}s"
    assert acceptance(6, "inequality ensembles", ok, detail)


def test_c07_transport(acceptance):
    fam = ramped_shear_family(get_grid(128), amplitudes=(1, 2, 4, 8), horizon=1.0, lp_exponents=(2, 4, 6))
    margin = min(m.relative_margin for ms in fam.lp_margins.values() for m in ms)
    log_growth = math.log(fam.envelope_growth)
    ok = margin >= -1e-6 and fam.linear_spread <= 4.0 and log_growth >= 4.0
    detail = (f"L^p relative margin {margin:.1e}; linear ratios "
              + ", ".join(f"{r:.3f}" for r in fam.linear_ratios)
              + f" (spread {fam.linear_spread:.2f} <= 4); envelope grows by e^{log_growth:.1f}")
    assert acceptance(7, "transport estimates", ok, detail)


def test_c08_manufactured_pressure(acceptance):
    g = get_grid(128)
    x1, x2 = g.mesh
    rho = 2 + 0.5 * np.sin(x1)
    pi_star = np.cos(x1) * np.cos(x2)
    # G = -div((1/rho) grad Pi*) written out by hand
    G = -0.5 * np.sin(x1) * np.cos(x1) * np.cos(x2) / rho**2 + 2 * np.cos(x1) * np.cos(x2) / rho
    sol = solve_pressure_equation(g, rho, G, tol=1e-12, max_iter=200)
    err = float(np.abs(sol.pi - pi_star).max() / np.abs(pi_star).max())
    ok = err <= 1e-8 and sol.iterations <= 200
    assert acceptance(8, "manufactured pressure", ok, f"relative error {err:.1e} in {sol.iterations} iterations")


def test_c09_order(acceptance):
    g = get_grid(128)
    s0 = scenarios.stratified_shear(g)
    T = 0.4
    finals = [run(s0, SolverConfig(dt=dt, pressure_tol=1e-13), T).final_state for dt in (0.04, 0.02, 0.01)]

    def dist(a, b):
        return g.lp_norm(a.u - b.u, 2) + g.lp_norm(a.rho - b.rho, 2)

    e1, e2 = dist(finals[0], finals[1]), dist(finals[1], finals[2])
    ratio = e1 / e2
    ok = 12 <= ratio <= 20
    assert acceptance(9, "RK4 order", ok, f"self-convergence ratio {ratio:.2f} (differences {e1:.2e}, {e2:.2e})")


def test_c10_cross_validation(acceptance):
    g = get_grid(128)
    lines, ok = [], True
    for name in ("stratified_shear", "density_patch_vortex"):
        s0 = scenarios.build_scenario(name, g, coevolve=True)
        f = run(s0, SolverConfig(cfl=0.2, coevolve=True), 0.5).final_state
        ex = float(np.abs(f.X - compute_X(f)).max())
        ee = float(np.abs(f.eta - compute_eta(f)).max())
        ok &= ex <= 1e-5 and ee <= 1e-5
        lines.append(f"{name}: X {ex:.1e}, eta {ee:.1e}")
    assert acceptance(10, "co-evolution cross-validation", ok, "; ".join(lines) + " (tol 1e-5)")
