"""Exception hierarchy shared by all modules."""


class TanksepError(Exception):
    """Base class; ``stage`` names the pipeline stage when known."""

    def __init__(self, message, *, stage=None):
        super().__init__(message)
        self.stage = stage

    def with_stage(self, stage):
        self.stage = stage if self.stage is None else f"{stage}/{self.stage}"
        return self

    def __str__(self):
        msg = super().__str__()
        return f"[{self.stage}] {msg}" if self.stage else msg


class InvalidInputError(TanksepError, ValueError):
    pass


class DegenerateChannelError(InvalidInputError):
    pass


class ConfigError(TanksepError, ValueError):
    pass


class NumericalError(TanksepError, ArithmeticError):
    """Numerical failure during a simulation; ``step`` is the failing step index."""

    def __init__(self, message, *, step=None, stage=None):
        super().__init__(message, stage=stage)
        self.step = step


class NumericalBlowupError(NumericalError):
    pass


class StabilityError(NumericalError):
    """CFL bound exceeded."""


class DryCellError(NumericalError):
    """Water depth reached zero or below somewhere in the tank."""


class RankDeficiencyError(NumericalError):
    pass


class PrecisionError(NumericalError):
    """Finite-difference derivative estimate failed to reach the requested accuracy."""

    def __init__(self, message, *, error_estimate=None, stage=None):
        super().__init__(message, stage=stage)
        self.error_estimate = error_estimate
