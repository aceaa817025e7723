"""Exception types shared across the package."""


class VisionFlockError(Exception):
    """Base class for all library-specific errors."""


class ConfigError(VisionFlockError, ValueError):
    """Scenario or calibration config is malformed or violates a bound."""


class GeometryDomainError(VisionFlockError, ValueError):
    """Input outside the geometric domain of an operation (e.g. pixel off-image)."""


class DegenerateBoxError(GeometryDomainError):
    """Bounding box geometry is unusable for the range-from-size rule."""


class ConvergenceError(VisionFlockError, ArithmeticError):
    """An iterative solve did not reach tolerance."""

    def __init__(self, message: str, iterations: int):
        super().__init__(f"{message} (after {iterations} iterations)")
        self.iterations = iterations


class NumericalError(VisionFlockError, ArithmeticError):
    """A covariance lost positive-definiteness or a solve became singular."""


class ContractError(VisionFlockError, RuntimeError):
    """Caller violated an operation's sequencing or timestamp contract."""


class StatsError(VisionFlockError, ValueError):
    """Requested statistic is undefined for the given input."""


class SimulationAbort(VisionFlockError, RuntimeError):
    """Simulation produced a non-finite state and stopped."""

    def __init__(self, message: str, time: float | None = None, agent: int | None = None):
        detail = message
        if time is not None:
            detail += f" at t={time:.3f}s"
        if agent is not None:
            detail += f" (agent {agent})"
        super().__init__(detail)
        self.time = time
        self.agent = agent
