"""Exception hierarchy.

Everything raised on purpose derives from :class:`RealcheckError`. The CLI maps
:class:`UsageError` to exit code 1 and :class:`DataError` to exit code 2.
"""


class RealcheckError(Exception):
    pass


class UsageError(RealcheckError, ValueError):
    pass


class DataError(RealcheckError, ValueError):
    pass


class InvalidInput(UsageError):
    pass


class InvalidRegime(UsageError):
    pass


class DimensionMismatch(DataError):
    pass


class MixedDimensions(DataError):
    def __init__(self, message, line=None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


class NotPositiveDefinite(DataError):
    pass


class DegenerateSample(DataError):
    pass


class TooFewSamples(DataError):
    pass


class EmptySample(DataError):
    pass


class ConvergenceFailure(RealcheckError, ArithmeticError):
    pass


class ZeroVariance(DataError):
    pass


class AllRecordsDegenerate(DataError):
    pass


class NoRawSamples(DataError):
    pass


class TooFewRecords(DataError):
    pass


class InvalidRecord(DataError):
    pass


class NeedsSamples(DataError):
    """A spread score (win_var, mi) was requested for records with K = 1."""

    def __init__(self, message, count=0):
        super().__init__(message)
        self.count = count


class OneClassOnly(DataError):
    pass


class NoPositives(DataError):
    pass


class DegenerateCurve(DataError):
    pass


class ParseError(DataError):
    def __init__(self, line, reason):
        super().__init__(f"line {line}: {reason}")
        self.line = line
        self.reason = reason


class InvalidProbability(ParseError):
    pass
