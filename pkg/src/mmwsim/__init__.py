"""Monte-Carlo simulator for multiuser mmWave MIMO downlink with zero-forcing precoding."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    InvalidArgumentError,
    InvalidConfigError,
    NumericalFailureError,
    SelectionInfeasibleError,
    SimulationError,
    SingularChannelError,
)
from .scenario import LosModelParams, PathLossParams, ScenarioConfig  # noqa: E402

__all__ = [
    "__version__",
    "ScenarioConfig",
    "PathLossParams",
    "LosModelParams",
    "SimulationError",
    "InvalidArgumentError",
    "InvalidConfigError",
    "SingularChannelError",
    "NumericalFailureError",
    "SelectionInfeasibleError",
]
