"""Exception hierarchy shared by every emulator module."""


class EmulatorError(Exception):
    """Base class for all emulator errors."""


class DomainError(EmulatorError, ValueError):
    """An input lies outside the domain of an operation."""


class NumericOverflowError(EmulatorError, ArithmeticError):
    """The plant state became non-finite during a run."""


class InstabilityError(EmulatorError, ValueError):
    """A discretization step is too large for the machine parameters."""


class NoSteadyStateError(EmulatorError, ArithmeticError):
    """The discrete fixed-point system is singular."""


class AlignmentError(EmulatorError, ValueError):
    """Two traces do not share the same timestamps."""


class ConfigError(EmulatorError, ValueError):
    """A scenario configuration could not be parsed or validated."""


class DeterminismError(EmulatorError, RuntimeError):
    """Two runs of the same scenario produced different output."""
