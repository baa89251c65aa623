"""Exception hierarchy. CLI exit codes are keyed off these classes."""


class LcascError(Exception):
    exit_code = 1


class ValidationError(LcascError, ValueError):
    pass


class ConfigError(ValidationError):
    pass


class ShapeError(ValidationError):
    pass


class InputTooShortError(ValidationError):
    pass


class DecodeError(LcascError, OSError):
    exit_code = 2


class UnsupportedFormatError(DecodeError):
    pass


class StateError(LcascError, RuntimeError):
    pass


class NumericalError(LcascError, ArithmeticError):
    exit_code = 3
