"""Pseudo-spectral tools for the 2-D density-dependent incompressible Euler equations.

Submodules
----------
spectral          grid, FFT operators, ``Field``
littlewood_paley  dyadic blocks, Besov norms, inequality verifiers
paraproduct       Bony decomposition and continuity estimates
solver            RK4 integrator, pressure solve, derived identities, checkpoints
scenarios         named initial data
diagnostics       per-step records and continuation-criterion reports
transport         linear transport harness
suites, cli       verification suites and the ``nheuler`` command
"""

__version__ = "0.1.0"

from .errors import (  # noqa: E402,F401
    BlockRangeError, BlowUpError, ConfigError, DataError, InputError, PressureDivergenceError, VacuumError,
)
from .spectral import Field, TorusGrid, get_grid  # noqa: E402,F401
