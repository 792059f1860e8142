"""Pseudo-spectral integrator for the 2-D density-dependent Euler equations.

State variables are ``(rho, u)``; the pressure is eliminated at every stage by
solving ``-div((1/rho) grad Pi) = div(u . grad u)``.  Every product goes
through the 2/3-rule truncation, so a state that starts inside the dealias
band stays there and the discrete product rule holds exactly.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Iterable

import numpy as np

from .errors import BlowUpError, DataError, InputError, PressureDivergenceError, VacuumError
from .spectral import TorusGrid, get_grid

log = logging.getLogger(__name__)

CHECKPOINT_FORMAT = "nheuler-state"
CHECKPOINT_VERSION = 1


@dataclass(frozen=True, eq=False)
class FlowState:
    """Snapshot ``(t, rho, u)`` plus optional co-evolved ``X`` and ``eta``.

    Arrays are physical samples: ``rho`` is ``(n, n)``, ``u`` and ``X`` are
    ``(2, n, n)``, ``eta`` is ``(n, n)``.
    """

    grid: TorusGrid
    t: float
    rho: np.ndarray
    u: np.ndarray
    X: np.ndarray | None = None
    eta: np.ndarray | None = None

    def __post_init__(self):
        for name in ("rho", "u", "X", "eta"):
            a = getattr(self, name)
            if a is not None:
                view = a.view()
                view.setflags(write=False)
                object.__setattr__(self, name, view)

    @property
    def coevolved(self) -> bool:
        return self.X is not None


@dataclass(frozen=True)
class SolverConfig:
    cfl: float = 0.4
    pressure_tol: float = 1e-10
    pressure_max_iter: int = 500
    coevolve: bool = False
    cadence: int = 1
    dt: float | None = None          # fixed step; overrides the CFL rule
    velocity_floor: float = 1e-12
    grad_ceiling: float = 1e6        # ||grad u||_inf above this counts as blow-up
    resolution_tol: float = 1e-8     # spectral tail share that triggers a warning

    def __post_init__(self):
        if not 0 < self.cfl <= 1:
            raise InputError(f"cfl={self.cfl} outside (0, 1]")
        if not self.pressure_tol > 0:
            raise InputError("pressure tolerance must be positive")
        if self.pressure_max_iter < 1 or self.cadence < 1:
            raise InputError("pressure_max_iter and cadence must be >= 1")
        if self.dt is not None and not self.dt > 0:
            raise InputError("fixed dt must be positive")


# -- construction --------------------------------------------------------------


def make_state(grid: TorusGrid, rho, u, t: float = 0.0, coevolve: bool = False) -> FlowState:
    """Ingest initial data: truncate to the dealias band and project ``u``."""
    rho = grid.dealias(np.asarray(rho, dtype=float))
    u = np.asarray(u, dtype=float)
    if u.shape != (2, grid.n, grid.n) or rho.shape != (grid.n, grid.n):
        raise InputError("rho must be (n, n) and u must be (2, n, n)")
    if not (np.all(np.isfinite(rho)) and np.all(np.isfinite(u))):
        raise InputError("initial data contain non-finite values")
    if rho.min() <= 0:
        raise VacuumError(f"initial density reaches {rho.min():.3g} <= 0")
    u = grid.leray(grid.dealias(u))
    state = FlowState(grid, float(t), rho, u)
    return with_coevolved(state) if coevolve else state


def with_coevolved(state: FlowState) -> FlowState:
    return replace(state, X=compute_X(state), eta=compute_eta(state))


# -- pressure ------------------------------------------------------------------


@dataclass
class PressureSolve:
    pi: np.ndarray
    iterations: int
    residual: float


def solve_pressure_equation(grid: TorusGrid, rho: np.ndarray, source: np.ndarray, tol: float = 1e-10,
                            max_iter: int = 500, guess: np.ndarray | None = None) -> PressureSolve:
    """Mean-zero ``Pi`` with ``-div(P[(1/rho) grad Pi]) = source``.

    Fixed point preconditioned by the constant-coefficient inverse Laplacian,
    ``Pi <- Pi + (-Delta)^-1 [rho r]`` with ``r = source + div(P[(1/rho) grad Pi])``.
    Without truncation this is ``Pi <- (-Delta)^-1[-grad log rho . grad Pi + rho source]``.
    """
    rmin = float(rho.min())
    if not rmin > 0:
        raise VacuumError(f"density minimum {rmin:.3g} <= 0")
    sigma = 1.0 / rho
    sh = grid.fft(source)
    sh[0, 0] = 0.0
    src = grid.ifft(sh)
    src_norm = grid.lp_norm(src, 2)
    if src_norm == 0:
        return PressureSolve(np.zeros_like(rho), 0, 0.0)
    ik1, ik2 = grid.ik
    mask, inv = grid.dealias_mask, grid.inv_ksq

    pih = inv * grid.fft(rho * src) if guess is None else grid.fft(guess)
    res = math.inf
    for it in range(1, max_iter + 1):
        flux = sigma * grid.ifft(np.stack([ik1 * pih, ik2 * pih]))
        fh = mask * grid.fft(flux)
        r = src + grid.ifft(ik1 * fh[0] + ik2 * fh[1])
        res = grid.lp_norm(r, 2) / src_norm
        if res <= tol:
            return PressureSolve(grid.ifft(pih), it - 1, res)
        if not math.isfinite(res) or res > 1e12:
            break
        pih = pih + inv * grid.fft(rho * r)
    raise PressureDivergenceError(
        f"pressure iteration stalled: relative residual {res:.3e} after {max_iter} iterations "
        f"(tolerance {tol:.1e})", res, max_iter)


def advection(grid: TorusGrid, u: np.ndarray, G: np.ndarray | None = None) -> np.ndarray:
    """``P[u . grad u]``; ``G[i, j] = d_j u^i``."""
    if G is None:
        G = grid.grad_tensor(u)
    return grid.dealias(np.einsum("jxy,ijxy->ixy", u, G))


def compute_pressure(state: FlowState, config: SolverConfig = SolverConfig(),
                     guess: np.ndarray | None = None) -> np.ndarray:
    g = state.grid
    F = advection(g, state.u)
    return solve_pressure_equation(g, state.rho, g.div(F), config.pressure_tol,
                                   config.pressure_max_iter, guess).pi


# -- right-hand side ------------------------------------------------------------


def _rates(grid, rho, u, X, eta, config, guess):
    G = grid.grad_tensor(u)
    F = advection(grid, u, G)
    solve = solve_pressure_equation(grid, rho, grid.div(F), config.pressure_tol,
                                    config.pressure_max_iter, guess)
    pi = solve.pi
    drho = -grid.mul(u, grid.grad(rho)).sum(axis=0)
    du = -F - grid.mul(1.0 / rho, grid.grad(pi))
    dX = deta = None
    if X is not None:
        dXu = grid.dealias(np.einsum("jxy,ijxy->ixy", X, G))
        dX = -grid.dealias(np.einsum("jxy,ijxy->ixy", u, grid.grad_tensor(X))) + dXu
        deta = -grid.mul(u, grid.grad(eta)).sum(axis=0) + grid.mul(dXu, u).sum(axis=0)
    return (drho, du, dX, deta), pi


def rhs(state: FlowState, config: SolverConfig = SolverConfig()):
    """``(drho/dt, du/dt)``, plus ``(dX/dt, deta/dt)`` for co-evolved states."""
    rates, _ = _rates(state.grid, state.rho, state.u, state.X, state.eta, config, None)
    return rates if state.coevolved else rates[:2]


def stable_dt(state: FlowState, config: SolverConfig) -> float:
    if config.dt is not None:
        return config.dt
    umax = max(state.grid.lp_norm(state.u, math.inf), config.velocity_floor)
    return config.cfl * state.grid.h / umax


def _axpy(y, a, k):
    return tuple(None if yi is None else yi + a * ki for yi, ki in zip(y, k))


def step(state: FlowState, config: SolverConfig = SolverConfig(), dt: float | None = None,
         pressure_guess: np.ndarray | None = None) -> FlowState:
    """One classical RK4 step followed by Leray re-projection of ``u``."""
    g = state.grid
    dt = stable_dt(state, config) if dt is None else dt
    y = (state.rho, state.u, state.X, state.eta)
    guess = pressure_guess
    try:
        k1, guess = _rates(g, *y, config, guess)
        k2, guess = _rates(g, *_axpy(y, dt / 2, k1), config, guess)
        k3, guess = _rates(g, *_axpy(y, dt / 2, k2), config, guess)
        k4, guess = _rates(g, *_axpy(y, dt, k3), config, guess)
    except FloatingPointError as exc:  # pragma: no cover - numpy default is warn
        raise BlowUpError(str(exc), state) from exc
    new = []
    for yi, a, b, c, d in zip(y, k1, k2, k3, k4):
        new.append(None if yi is None else yi + dt / 6 * (a + 2 * b + 2 * c + d))
    rho, u, X, eta = new
    u = g.leray(u)
    for name, a in (("rho", rho), ("u", u), ("X", X), ("eta", eta)):
        if a is not None and not np.all(np.isfinite(a)):
            raise BlowUpError(f"non-finite values in {name} at t={state.t + dt:.6g}", state)
    gu = g.lp_norm(g.grad_tensor(u), math.inf)
    if gu > config.grad_ceiling:
        raise BlowUpError(f"||grad u||_inf = {gu:.3e} exceeds ceiling {config.grad_ceiling:.1e} "
                          f"at t={state.t + dt:.6g}", state)
    out = FlowState(g, state.t + dt, rho, u, X, eta)
    object.__setattr__(out, "_pressure", guess)
    return out


# -- derived fields -------------------------------------------------------------


def compute_momentum(state: FlowState) -> np.ndarray:
    return state.grid.mul(state.rho, state.u)


def compute_vorticity(state: FlowState) -> np.ndarray:
    return state.grid.curl(state.u)


def compute_X(state: FlowState) -> np.ndarray:
    """``X = grad^perp rho``."""
    return state.grid.perp_grad(state.rho)


def compute_eta(state: FlowState) -> np.ndarray:
    """Vorticity of the momentum, ``curl(rho u)``."""
    return state.grid.curl(compute_momentum(state))


def grad_u(state: FlowState) -> np.ndarray:
    return state.grid.grad_tensor(state.u)


def compute_dXu(state: FlowState) -> np.ndarray:
    """``d_X u = (X . grad) u`` with ``X = grad^perp rho``."""
    g = state.grid
    return g.dealias(np.einsum("jxy,ijxy->ixy", compute_X(state), grad_u(state)))


def compute_dX_usq(state: FlowState) -> np.ndarray:
    g = state.grid
    usq = g.mul(state.u, state.u).sum(axis=0)
    return g.mul(compute_X(state), g.grad(usq)).sum(axis=0)


def eta_identity_residual(state: FlowState) -> float:
    """sup |eta - (rho omega + u . grad^perp rho)|."""
    g = state.grid
    rhs_ = g.mul(state.rho, compute_vorticity(state)) + g.mul(state.u, compute_X(state)).sum(axis=0)
    return float(np.abs(compute_eta(state) - rhs_).max())


@dataclass
class HelmholtzParts:
    solenoidal: np.ndarray
    gradient: np.ndarray
    residual: float


def helmholtz_momentum(state: FlowState) -> HelmholtzParts:
    """``m = -grad^perp (-Delta)^-1 eta - grad (-Delta)^-1 (u . grad rho)`` up to the mean."""
    g = state.grid
    m = compute_momentum(state)
    sol = -g.perp_grad(g.inv_lap(g.curl(m)))
    div_m = g.mul(state.u, g.grad(state.rho)).sum(axis=0)
    grad_part = -g.grad(g.inv_lap(div_m))
    resid = m - g.mean(m)[:, None, None] - sol - grad_part
    return HelmholtzParts(sol, grad_part, float(np.abs(resid).max()))


@dataclass
class GradUReconstruction:
    reconstructed: np.ndarray
    direct: np.ndarray
    discrepancy: float


def reconstruct_grad_u(state: FlowState) -> GradUReconstruction:
    """``grad u = -(1/rho^2) grad rho (x) m + (1/rho) grad m`` against spectral ``grad u``."""
    g = state.grid
    m = compute_momentum(state)
    Gm = g.grad_tensor(m)
    grho = g.grad(state.rho)
    inv = 1.0 / state.rho
    recon = inv * Gm - inv**2 * np.einsum("ixy,jxy->ijxy", m, grho)
    direct = grad_u(state)
    return GradUReconstruction(recon, direct, float(np.abs(recon - direct).max()))


def energy(state: FlowState) -> float:
    """``||sqrt(rho) u||_{L^2}^2``."""
    return state.grid.integrate(state.rho * (state.u**2).sum(axis=0))


def spectral_tail(grid: TorusGrid, a: np.ndarray) -> float:
    """Share of fluctuation energy in the outer third of the dealias band."""
    ah = grid.fft(a)
    w = np.abs(ah) ** 2
    if a.ndim == 3:
        w = w.sum(axis=0)
    w[0, 0] = 0.0
    kinf = np.maximum(np.abs(grid.k1), grid.k2)
    total = w.sum()
    return float(w[kinf > 2 * grid.dealias_cutoff / 3].sum() / total) if total > 0 else 0.0


# -- time loop -------------------------------------------------------------------


@dataclass
class RunSummary:
    status: str                      # completed | blow_up | pressure_divergence
    t: float
    steps: int
    final_state: FlowState
    message: str = ""
    warnings: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.status == "completed"


Callback = Callable[[FlowState, int], None]


def run(initial: FlowState, config: SolverConfig, horizon: float,
        callbacks: Iterable[Callback] = (), max_steps: int | None = None) -> RunSummary:
    """Advance to ``horizon`` (or until a failure), calling ``callbacks`` every
    ``config.cadence`` steps and on the last state."""
    callbacks = list(callbacks)
    state = initial
    if config.coevolve and not state.coevolved:
        state = with_coevolved(state)
    g = state.grid
    warnings: list[str] = []
    warned = False

    def notify(s, i):
        for cb in callbacks:
            cb(s, i)

    notify(state, 0)
    last_notified = 0
    nsteps = 0
    status, message = "completed", ""
    guess = None
    t_end = initial.t + horizon
    while state.t < t_end - 1e-14 * max(1.0, abs(t_end)):
        if max_steps is not None and nsteps >= max_steps:
            status, message = "completed", f"stopped after max_steps={max_steps}"
            break
        dt = min(stable_dt(state, config), t_end - state.t)
        try:
            new = step(state, config, dt, guess)
        except (BlowUpError, VacuumError) as exc:
            status, message = "blow_up", str(exc)
            break
        except PressureDivergenceError as exc:
            status, message = "pressure_divergence", str(exc)
            break
        guess = getattr(new, "_pressure", None)
        state = new
        nsteps += 1
        if not warned:
            tail = max(spectral_tail(g, state.rho), spectral_tail(g, state.u))
            if tail > config.resolution_tol:
                warned = True
                warnings.append(f"resolution: spectral tail share {tail:.2e} at t={state.t:.6g}")
                log.warning(warnings[-1])
        if nsteps % config.cadence == 0:
            notify(state, nsteps)
            last_notified = nsteps
    if last_notified != nsteps:
        notify(state, nsteps)
    return RunSummary(status, state.t, nsteps, state, message, warnings)


# -- checkpoints -----------------------------------------------------------------


def save_state(path, state: FlowState) -> Path:
    """Write a self-describing ``.npz`` (little-endian float64 plus JSON metadata)."""
    path = Path(path)
    meta = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "n": state.grid.n,
        "domain_length": "2*pi",
        "t": state.t,
        "dtype": "<f8",
        "endianness": "little",
        "layout": "physical samples a[i1, i2], x = (i1, i2) * 2*pi/n; vectors a[c, i1, i2]",
        "fields": ["rho", "u"] + (["X", "eta"] if state.coevolved else []),
    }
    arrays = {"rho": state.rho.astype("<f8"), "u": state.u.astype("<f8")}
    if state.coevolved:
        arrays.update(X=state.X.astype("<f8"), eta=state.eta.astype("<f8"))
    with open(path, "wb") as fh:
        np.savez(fh, meta=np.frombuffer(json.dumps(meta).encode(), dtype=np.uint8), **arrays)
    return path


def load_state(path) -> FlowState:
    try:
        with np.load(path) as data:
            meta = json.loads(bytes(data["meta"]).decode())
            if meta.get("format") != CHECKPOINT_FORMAT:
                raise DataError(f"{path}: not a {CHECKPOINT_FORMAT} checkpoint")
            arrays = {k: np.asarray(data[k], dtype=float) for k in meta["fields"]}
    except (OSError, KeyError, ValueError) as exc:
        raise DataError(f"cannot read checkpoint {path}: {exc}") from exc
    g = get_grid(meta["n"])
    return FlowState(g, float(meta["t"]), arrays["rho"], arrays["u"], arrays.get("X"), arrays.get("eta"))
