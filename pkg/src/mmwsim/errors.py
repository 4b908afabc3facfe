"""Exception hierarchy shared by all simulator modules."""


class SimulationError(Exception):
    """Base class for every error raised by mmwsim."""


class InvalidArgumentError(SimulationError, ValueError):
    """An argument is outside the domain of the operation."""


class InvalidConfigError(SimulationError, ValueError):
    """A scenario or sweep configuration violates its invariants."""


class SingularChannelError(SimulationError, ArithmeticError):
    """A channel (or Gram) matrix is rank deficient, so zero forcing is infeasible."""


class NumericalFailureError(SimulationError, ArithmeticError):
    """An iterative decomposition failed to converge."""


class SelectionInfeasibleError(SimulationError):
    """No subset of users admits a full-rank zero-forcing channel."""
