"""Exception hierarchy shared by all fdsic modules."""


class FdsicError(Exception):
    """Base class for simulator errors."""


class ConfigError(FdsicError, ValueError):
    """Invalid configuration; ``key`` names the offending field when known."""

    def __init__(self, message, key=None):
        super().__init__(message if key is None else f"{key}: {message}")
        self.key = key


class FramingError(FdsicError, ValueError):
    """Waveform length does not split into whole OFDM symbols."""


class SingularFitError(FdsicError, ArithmeticError):
    """Least-squares regression matrix is rank deficient.

    ``column`` is the index of the first regressor found to be linearly
    dependent on the preceding ones; ``label`` describes it (for example
    ``"k=1, l=0"`` for a Hammerstein basis column).
    """

    def __init__(self, message, column=None, label=None, condition=None):
        super().__init__(message)
        self.column = column
        self.label = label
        self.condition = condition


class UndeterminedSystemError(FdsicError, ValueError):
    """Fewer observations than coefficients."""


class DivisionGuardError(FdsicError, ZeroDivisionError):
    """A reference symbol used as a divisor is zero."""


class IllConditionedEqualizationError(FdsicError, ArithmeticError):
    """Channel estimate too small to equalize on some subcarriers."""

    def __init__(self, message, subcarriers=()):
        super().__init__(message)
        self.subcarriers = tuple(subcarriers)


class TopologyError(FdsicError, ValueError):
    """Malformed or inconsistent topology file."""


class LinkRunError(FdsicError, RuntimeError):
    """A link-level run failed; the message carries frame context."""

    def __init__(self, message, frame=None):
        super().__init__(message)
        self.frame = frame
