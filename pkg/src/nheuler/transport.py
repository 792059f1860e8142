"""Linear transport ``df/dt + v . grad f = g`` for prescribed divergence-free ``v``.

Used to check L^p conservation, the exponential Besov bound with
``V(t) = int ||grad v||_{L^inf cap B^{s-1}_{p,r}}`` and the linear-in-Lipschitz
bound at regularity zero, independently of the nonlinear solver.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import BlowUpError, InputError
from .littlewood_paley import BesovSpec, get_partition
from .spectral import TorusGrid

VelocityFn = Callable[[float], np.ndarray]
ForcingFn = Callable[[float], np.ndarray]

DIV_TOL = 1e-10


def _as_time_fn(obj):
    if obj is None or callable(obj):
        return obj
    arr = np.asarray(obj, dtype=float)
    arr.setflags(write=False)
    return lambda t: arr


@dataclass
class TransportProblem:
    """``velocity`` and ``forcing`` are arrays (steady) or callables of ``t``."""

    grid: TorusGrid
    f0: np.ndarray
    velocity: VelocityFn | np.ndarray
    horizon: float
    forcing: ForcingFn | np.ndarray | None = None

    def __post_init__(self):
        self.velocity = _as_time_fn(self.velocity)
        self.forcing = _as_time_fn(self.forcing)
        self.f0 = np.asarray(self.f0, dtype=float)
        if self.f0.shape != (self.grid.n, self.grid.n):
            raise InputError("f0 must be an (n, n) array")
        if not self.horizon >= 0:
            raise InputError("horizon must be nonnegative")

    def v(self, t: float) -> np.ndarray:
        v = np.asarray(self.velocity(t), dtype=float)
        if v.shape != (2, self.grid.n, self.grid.n):
            raise InputError("velocity must be a (2, n, n) array")
        div = np.abs(self.grid.div(v)).max()
        if div > DIV_TOL * max(1.0, np.abs(v).max()):
            raise InputError(f"velocity is not divergence-free at t={t:.6g}: |div v| = {div:.2e}")
        return v

    def g(self, t: float) -> np.ndarray:
        if self.forcing is None:
            return np.zeros((self.grid.n, self.grid.n))
        return np.asarray(self.forcing(t), dtype=float)


@dataclass
class TransportTrajectory:
    problem: TransportProblem
    times: np.ndarray
    states: list = field(repr=False, default_factory=list)

    @property
    def grid(self) -> TorusGrid:
        return self.problem.grid

    def final(self) -> np.ndarray:
        return self.states[-1]


def transport_solve(problem: TransportProblem, cfl: float = 0.4, dt: float | None = None,
                    dealias_initial: bool = True) -> TransportTrajectory:
    """RK4 spectral advection; every step is recorded."""
    g = problem.grid
    f = g.dealias(problem.f0) if dealias_initial else problem.f0.copy()

    def rate(t, f):
        v = problem.v(t)
        return -g.mul(v, g.grad(f)).sum(axis=0) + g.dealias(problem.g(t))

    t, T = 0.0, problem.horizon
    times, states = [0.0], [f]
    while t < T - 1e-14 * max(1.0, T):
        if dt is None:
            vmax = max(g.lp_norm(problem.v(t), math.inf), 1e-12)
            h = min(cfl * g.h / vmax, T - t)
        else:
            h = min(dt, T - t)
        k1 = rate(t, f)
        k2 = rate(t + h / 2, f + h / 2 * k1)
        k3 = rate(t + h / 2, f + h / 2 * k2)
        k4 = rate(t + h, f + h * k3)
        f = f + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        t += h
        if not np.all(np.isfinite(f)):
            raise BlowUpError(f"non-finite transport solution at t={t:.6g}")
        times.append(t)
        states.append(f)
    return TransportTrajectory(problem, np.array(times), states)


def _cumtrapz(t, q):
    out = np.zeros(len(q))
    if len(q) > 1:
        out[1:] = np.cumsum(0.5 * (q[1:] + q[:-1]) * np.diff(t))
    return out


# -- L^p bound -------------------------------------------------------------------


@dataclass
class LpMargin:
    p: float
    margin: float              # min_t (RHS - LHS)
    relative_margin: float     # min_t (RHS - LHS) / RHS
    tol: float = 1e-6

    @property
    def passed(self) -> bool:
        return self.relative_margin >= -self.tol


def verify_lp_estimate(traj: TransportTrajectory, p: float, tol: float = 1e-6) -> LpMargin:
    """``||f(t)||_p <= ||f0||_p + int_0^t ||g||_p`` at every recorded time."""
    g = traj.grid
    lhs = np.array([g.lp_norm(f, p) for f in traj.states])
    gnorm = np.array([g.lp_norm(traj.problem.g(t), p) for t in traj.times])
    rhs = lhs[0] + _cumtrapz(traj.times, gnorm)
    diff = rhs - lhs
    with np.errstate(divide="ignore", invalid="ignore"):
        rel = np.where(rhs > 0, diff / rhs, np.where(diff >= 0, 0.0, -np.inf))
    return LpMargin(p, float(diff.min()), float(rel.min()), tol)


# -- exponential bound ----------------------------------------------------------------


def lipschitz_condition(spec: BesovSpec, d: int = 2) -> bool:
    edge = 1 + d / spec.p
    return spec.s > edge + 1e-12 or (abs(spec.s - edge) <= 1e-12 and spec.r == 1)


def sigma_admissible(sigma: float, p: float, d: int = 2, divergence_free: bool = True) -> bool:
    pinv = 0.0 if math.isinf(p) else 1.0 / p
    floor = -d * min(pinv, 1.0 - pinv)
    return sigma >= floor - (1.0 if divergence_free else 0.0)


def V_integrand(traj: TransportTrajectory, velocity_spec: BesovSpec) -> np.ndarray:
    """``||grad v(t)||_{L^inf} + ||grad v(t)||_{B^{s-1}_{p,r}}`` at the recorded times."""
    g = traj.grid
    part = get_partition(g.n)
    lower = BesovSpec(velocity_spec.s - 1, velocity_spec.p, velocity_spec.r)
    out = []
    for t in traj.times:
        G = g.grad_tensor(traj.problem.v(t))
        out.append(g.lp_norm(G, math.inf) + lower.aggregate(part.block_norms(G, lower.p)))
    return np.array(out)


@dataclass
class ExponentialReport:
    times: np.ndarray
    lhs: np.ndarray          # ||f(t)||_{B^sigma_{p,r}}
    rhs0: np.ndarray         # ||f0|| + int ||g||
    V: np.ndarray
    spec: BesovSpec

    @property
    def envelope(self) -> float:
        """``exp(V(T))`` with unit constant."""
        return float(math.exp(self.V[-1]))

    @property
    def C_emp(self) -> float:
        """Smallest constant C for which the recorded norms satisfy ``lhs <= e^{C V} rhs0``."""
        ok = self.V > 0
        if not np.any(ok):
            return 0.0
        with np.errstate(divide="ignore"):
            c = np.log(self.lhs[ok] / self.rhs0[ok]) / self.V[ok]
        return float(max(np.max(c), 0.0))


def verify_exponential_estimate(traj: TransportTrajectory, spec: BesovSpec,
                                velocity_spec: BesovSpec = BesovSpec(1, math.inf, 1)) -> ExponentialReport:
    if not sigma_admissible(spec.s, spec.p):
        raise InputError(f"regularity sigma={spec.s} below the admissible range for p={spec.p}")
    if not lipschitz_condition(velocity_spec):
        raise InputError("velocity indices must embed in the Lipschitz class")
    g = traj.grid
    part = get_partition(g.n)
    lhs = np.array([spec.aggregate(part.block_norms(f, spec.p)) for f in traj.states])
    gn = np.array([spec.aggregate(part.block_norms(traj.problem.g(t), spec.p)) for t in traj.times])
    rhs0 = lhs[0] + _cumtrapz(traj.times, gn)
    V = _cumtrapz(traj.times, V_integrand(traj, velocity_spec))
    return ExponentialReport(traj.times, lhs, rhs0, V, spec)


# -- linear growth at regularity zero -------------------------------------------------


@dataclass
class LinearGrowthReport:
    ratio: float
    sup_norm: float            # sup_t ||f(t)||_{B^0_{p,r}}
    data_norm: float           # ||f0|| + ||g||_{L^1_T}
    lipschitz_integral: float  # int ||grad v||_inf


def verify_linear_growth(traj: TransportTrajectory, p: float = math.inf, r: float = 1) -> LinearGrowthReport:
    """``sup_t ||f||_{B^0_{p,r}} / [(||f0||_{B^0_{p,r}} + ||g||_{L^1_T B^0_{p,r}})(1 + int ||grad v||_inf)]``."""
    g = traj.grid
    spec = BesovSpec(0, p, r)
    part = get_partition(g.n)
    norms = np.array([spec.aggregate(part.block_norms(f, p)) for f in traj.states])
    gn = np.array([spec.aggregate(part.block_norms(traj.problem.g(t), p)) for t in traj.times])
    lip = np.array([g.lp_norm(g.grad_tensor(traj.problem.v(t)), math.inf) for t in traj.times])
    data = norms[0] + _cumtrapz(traj.times, gn)[-1]
    L = _cumtrapz(traj.times, lip)[-1]
    ratio = float(norms.max() / (data * (1 + L))) if data > 0 else 0.0
    return LinearGrowthReport(ratio, float(norms.max()), float(data), float(L))


# -- the ramped-shear family ---------------------------------------------------------------


def shear_problem(grid: TorusGrid, amplitude: float, horizon: float = 1.0, f0=None) -> TransportProblem:
    """``v = (A sin x2, 0)`` acting on ``f0`` (default ``cos x1``)."""
    x1, x2 = grid.mesh
    v = np.stack([amplitude * np.sin(x2), np.zeros_like(x2)])
    f0 = np.cos(x1) if f0 is None else f0
    return TransportProblem(grid, f0, v, horizon)


@dataclass
class FamilyResult:
    amplitudes: list
    linear_ratios: list
    envelopes: list
    lp_margins: dict

    @property
    def linear_spread(self) -> float:
        return max(self.linear_ratios) / min(self.linear_ratios)

    @property
    def envelope_growth(self) -> float:
        return max(self.envelopes) / min(self.envelopes)


def ramped_shear_family(grid: TorusGrid, amplitudes: Sequence[float] = (1, 2, 4, 8), horizon: float = 1.0,
                        p: float = math.inf, r: float = 1, lp_exponents: Sequence[float] = (2, 4, 6),
                        cfl: float = 0.4) -> FamilyResult:
    ratios, envs, margins = [], [], {}
    for A in amplitudes:
        traj = transport_solve(shear_problem(grid, A, horizon), cfl=cfl)
        ratios.append(verify_linear_growth(traj, p, r).ratio)
        envs.append(verify_exponential_estimate(traj, BesovSpec(0, p, r)).envelope)
        margins[A] = [verify_lp_estimate(traj, q) for q in lp_exponents]
    return FamilyResult(list(amplitudes), ratios, envs, margins)
