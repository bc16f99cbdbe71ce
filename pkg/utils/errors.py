# utils/errors.py


class CmonoError(Exception):
    """Base class for all toolkit errors"""


class DomainError(CmonoError, ValueError):
    """An argument lies outside the domain of the function being evaluated"""

    def __init__(self, message, subexpression=None):
        if subexpression is not None:
            message = f"{message} (in {subexpression})"
        super().__init__(message)
        self.subexpression = subexpression


class ParseError(CmonoError, ValueError):
    """Syntax error in an expression, interval or family spec"""

    def __init__(self, message, position=None, text=None):
        self.position = position
        self.text = text
        self.reason = message
        if position is not None:
            message = f"{message} at position {position}"
        super().__init__(message)

    def pointer(self):
        """Two-line rendering of the source with a caret under the position"""
        if self.text is None or self.position is None:
            return str(self)
        return f"{self.text}\n{' ' * self.position}^ {self.reason}"


class PreconditionError(CmonoError):
    """A builder or operation precondition does not hold"""


class InsufficientOrderError(CmonoError):
    """A jet does not carry enough derivatives for the request"""


class UnsupportedPrimitiveError(CmonoError):
    """The certifier met a primitive outside its axiom base"""


class ConfigError(CmonoError):
    """Invalid configuration value"""


class Alpha0Aborted(CmonoError):
    """The alpha0 bisection could not complete; carries the probe trace"""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = list(trace or [])
