"""Exception types shared across the package."""


class InputError(ValueError):
    """Invalid argument: wrong grid, inadmissible indices, degenerate data."""


class BlockRangeError(InputError, IndexError):
    """Dyadic block index outside ``-1..J_max``."""


class VacuumError(InputError):
    """Density touched or crossed zero."""


class PressureDivergenceError(RuntimeError):
    def __init__(self, message: str, residual: float, iterations: int):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class BlowUpError(RuntimeError):
    """Non-finite values or a velocity gradient above the configured ceiling.

    ``state`` holds the last finite state.
    """

    def __init__(self, message: str, state=None):
        super().__init__(message)
        self.state = state


class DataError(RuntimeError):
    """Missing or corrupt run output."""


class ConfigError(InputError):
    pass
