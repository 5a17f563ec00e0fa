"""Exception hierarchy for bnlslab."""


class BNLSError(Exception):
    """Base class for all errors raised by the package."""


class InadmissiblePower(BNLSError, ValueError):
    pass


class BadResolution(BNLSError, ValueError):
    pass


class WrongRepresentation(BNLSError, ValueError):
    pass


class ZeroField(BNLSError, ValueError):
    pass


class DivergedIteration(BNLSError, ArithmeticError):
    pass


class MaxIterationsExceeded(BNLSError, RuntimeError):
    pass


class InconsistentConstant(BNLSError, ArithmeticError):
    pass


class BlowupSuspected(BNLSError, RuntimeError):
    """A watchdog tripped during time stepping.

    ``reason`` is a short machine-readable tag ("amplitude" or "energy_drift").
    """

    def __init__(self, message, reason="unknown"):
        super().__init__(message)
        self.reason = reason


class InsufficientSnapshots(BNLSError, ValueError):
    pass


class ParseError(BNLSError, ValueError):
    def __init__(self, message, line=None, field=None):
        super().__init__(message)
        self.line = line
        self.field = field


class ValidationError(BNLSError, ValueError):
    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field


class CorruptCheckpoint(BNLSError, IOError):
    pass
