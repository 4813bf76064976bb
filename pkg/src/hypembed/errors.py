"""Exception hierarchy shared by all hypembed modules."""


class HypembedError(Exception):
    """Base class for every error raised by this package."""


class InputError(HypembedError, ValueError):
    """Malformed or inconsistent user input (files, parameters, graphs)."""


class ParseError(InputError):
    """A text input could not be parsed.

    Attributes
    ----------
    line : int or None
        1-based line number of the offending line, when known.
    """

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class DisconnectedGraphError(InputError):
    """The graph has at least two nodes with no path between them."""

    def __init__(self, u, v):
        super().__init__(f"graph is disconnected: no path between {u!r} and {v!r}")
        self.pair = (u, v)


class NumericalError(HypembedError, ArithmeticError):
    """Base class for numerical failures (exit code 3 in the CLI)."""


class DomainError(NumericalError):
    """An argument lies outside the domain of a geometric operation."""


class ConvergenceError(NumericalError):
    """An iterative solver stopped before reaching its tolerance.

    Attributes
    ----------
    residual : float
        The best residual (or gradient norm) reached.
    """

    def __init__(self, message, residual):
        super().__init__(f"{message} (achieved residual {float(residual):.3e})")
        self.residual = residual


class PrecisionError(NumericalError):
    """The working precision is too low to represent a point.

    Attributes
    ----------
    required_bits : int or None
        Estimated mantissa bits needed, when the caller could compute it.
    """

    def __init__(self, message, required_bits=None):
        if required_bits is not None:
            message = f"{message}; try --precision {required_bits} or more"
        super().__init__(message)
        self.required_bits = required_bits
