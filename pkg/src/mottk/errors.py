"""Exception types shared across the package."""


class MotError(Exception):
    """Base class for all errors raised by mottk."""


class InvalidBoxError(MotError, ValueError):
    """A box with non-positive width or height reached an overlap or motion op."""


class OutOfFrameError(MotError, ValueError):
    """A candidate box does not intersect the frame and cannot yield a patch."""


class DegeneratePredictionError(MotError, ArithmeticError):
    """Kalman prediction produced a non-positive height."""


class NumericError(MotError, ArithmeticError):
    """Non-finite values where finite ones are required."""


class DomainError(MotError, ValueError):
    """An argument lies outside the domain of the operation."""


class ConsistencyError(MotError):
    """Internal bookkeeping contradiction (duplicate IDs, orphan predictions)."""


class SequencingError(MotError):
    """Tracker frames were not supplied in strictly increasing unit steps."""


class ConfigError(MotError, ValueError):
    """Invalid or infeasible configuration."""


class SamplingExhausted(MotError):
    """Rejection sampling ran out of attempts."""


class UndefinedMetricError(MotError, ZeroDivisionError):
    """A metric is undefined for the given input (e.g. no ground truth)."""


class ParseError(MotError, ValueError):
    """Malformed MOTChallenge input.

    Parameters
    ----------
    message : str
        What went wrong.
    line : int, optional
        1-based line number of the offending record.
    source : str, optional
        File name, when known.
    """

    def __init__(self, message, line=None, source=None):
        self.line = line
        self.source = source
        where = ""
        if source is not None:
            where += f"{source}:"
        if line is not None:
            where += f"line {line}: "
        elif where:
            where += " "
        super().__init__(where + message)
