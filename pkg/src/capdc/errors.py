"""Exception types shared across the converter lab.

Config-file problems derive from :class:`ConfigError`; everything raised by
the numerical layers derives from :class:`NumericalError`. The CLI maps the
former to exit code 1 and the latter to exit code 2.
"""


class CapdcError(Exception):
    """Base class for all package errors."""


class ConfigError(CapdcError):
    """A configuration document failed to parse or validate."""


class MissingKey(ConfigError):
    def __init__(self, name):
        self.name = name
        super().__init__(f"missing required key: {name}")


class UnknownKey(ConfigError):
    def __init__(self, name):
        self.name = name
        super().__init__(f"unknown key: {name}")


class NonPositiveValue(ConfigError):
    def __init__(self, name):
        self.name = name
        super().__init__(f"value must be strictly positive: {name}")


class MalformedNumber(ConfigError):
    def __init__(self, name):
        self.name = name
        super().__init__(f"malformed numeric value for key: {name}")


class NumericalError(CapdcError):
    """A numerical routine could not produce a valid result."""


class InvalidDuty(NumericalError):
    pass


class NegativeLoad(NumericalError):
    pass


class NoConvergence(NumericalError):
    pass


class TargetOutOfRange(NumericalError):
    pass


class DutyOutOfRange(NumericalError):
    pass


class StepTooSmall(NumericalError):
    pass


class UndampedOperatingPoint(NumericalError):
    pass


class PolesNotSeparated(NumericalError):
    pass


class EmptyGrid(NumericalError):
    pass


class NoCrossover(NumericalError):
    pass


class CcmDetected(NumericalError):
    """Inductor current failed to reach zero within a half cycle."""

    def __init__(self, half_cycle):
        self.half_cycle = half_cycle
        super().__init__(
            f"continuous conduction detected in half cycle {half_cycle}"
        )


class NonFiniteState(NumericalError):
    pass


class NotSettled(NumericalError):
    pass


class OutOfRange(NumericalError):
    pass


class Instability(NumericalError):
    pass


class InvalidReference(NumericalError):
    pass
