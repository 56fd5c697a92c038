"""Chaotic source separation with a simulated shallow-water tank.

Two chaotic signals are summed, the sum forces a damped shallow-water
tank, and a ridge readout over probed wave heights recovers both signals.
"""

__version__ = "0.1.0"

from ._backend import COMPILED, NAME as BACKEND  # noqa: E402
from .errors import (  # noqa: E402
    ConfigError, DegenerateChannelError, DryCellError, InvalidInputError, NumericalBlowupError,
    NumericalError, PrecisionError, RankDeficiencyError, StabilityError, TanksepError)
from .trajectory import Trajectory  # noqa: E402

__all__ = [
    "BACKEND", "COMPILED", "ConfigError", "DegenerateChannelError", "DryCellError",
    "InvalidInputError", "NumericalBlowupError", "NumericalError", "PrecisionError",
    "RankDeficiencyError", "StabilityError", "TanksepError", "Trajectory", "__version__",
]
