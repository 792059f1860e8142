"""Named initial-data families for the solver."""

from __future__ import annotations

import numpy as np

from .errors import InputError
from .solver import FlowState, load_state, make_state
from .spectral import TorusGrid, random_field


def _velocity_from_stream(grid: TorusGrid, psi: np.ndarray) -> np.ndarray:
    return grid.perp_grad(psi)


def _noise(grid, seed, amplitude, kmax=4):
    if not amplitude:
        return 0.0
    rng = np.random.default_rng(seed)
    f = random_field(grid, rng, kmax, kmin=1)
    return amplitude * f / max(np.abs(f).max(), 1e-300)


def homogeneous_vortex(grid: TorusGrid, amplitude: float = 1.0, noise: float = 0.0,
                       seed: int = 0, coevolve: bool = False) -> FlowState:
    """Constant density with a few interacting vortex modes."""
    x1, x2 = grid.mesh
    psi = amplitude * (np.sin(x1) * np.sin(x2) + 0.5 * np.cos(2 * x1 + x2) + 0.3 * np.sin(x1 - 3 * x2))
    psi = psi + _noise(grid, seed, noise)
    return make_state(grid, np.ones((grid.n, grid.n)), _velocity_from_stream(grid, psi), coevolve=coevolve)


def stratified_shear(grid: TorusGrid, contrast: float = 2.0, amplitude: float = 1.0,
                     perturbation: float = 0.1, noise: float = 0.0, seed: int = 0,
                     coevolve: bool = False) -> FlowState:
    """Density layered in ``x2`` between 1 and ``contrast`` under a perturbed shear."""
    if contrast <= 0:
        raise InputError("density contrast must be positive")
    x1, x2 = grid.mesh
    rho = (1 + contrast) / 2 + (contrast - 1) / 2 * np.sin(x2)
    psi = amplitude * np.cos(x2) + perturbation * np.sin(x1) * np.sin(2 * x2)
    psi = psi + _noise(grid, seed, noise)
    return make_state(grid, rho, _velocity_from_stream(grid, psi), coevolve=coevolve)


def density_patch_vortex(grid: TorusGrid, contrast: float = 2.0, width: float = 0.6,
                         amplitude: float = 1.0, center=(np.pi / 2 + 0.5, np.pi / 2),
                         noise: float = 0.0, seed: int = 0, coevolve: bool = False) -> FlowState:
    """A smooth heavy (or light) blob carried by a cellular vortex flow."""
    if contrast <= 0 or width <= 0:
        raise InputError("contrast and width must be positive")
    x1, x2 = grid.mesh
    # periodic squared distance, equal to |x - c|^2 to leading order near c
    d2 = 2 * (1 - np.cos(x1 - center[0])) + 2 * (1 - np.cos(x2 - center[1]))
    rho = 1 + (contrast - 1) * np.exp(-d2 / (2 * width**2))
    psi = amplitude * np.sin(x1) * np.sin(x2) + _noise(grid, seed, noise)
    return make_state(grid, rho, _velocity_from_stream(grid, psi), coevolve=coevolve)


def custom(grid: TorusGrid, path: str, coevolve: bool = False) -> FlowState:
    state = load_state(path)
    if state.grid.n != grid.n:
        raise InputError(f"checkpoint has n={state.grid.n}, configuration asks for n={grid.n}")
    return make_state(grid, state.rho, state.u, t=state.t, coevolve=coevolve)


SCENARIOS = {
    "homogeneous_vortex": homogeneous_vortex,
    "stratified_shear": stratified_shear,
    "density_patch_vortex": density_patch_vortex,
    "custom": custom,
}


def build_scenario(name: str, grid: TorusGrid, **params) -> FlowState:
    try:
        factory = SCENARIOS[name]
    except KeyError:
        raise InputError(f"unknown scenario {name!r}; choose from {sorted(SCENARIOS)}") from None
    try:
        return factory(grid, **params)
    except TypeError as exc:
        raise InputError(f"bad parameters for scenario {name!r}: {exc}") from exc
