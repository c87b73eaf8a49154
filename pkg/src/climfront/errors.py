"""Exception hierarchy.

Every error raised on purpose by the package derives from ``ClimFrontError``.
The two intermediate classes tell the command-line front end which exit code
to use: ``DataError`` (bad or missing input, exit 2) and ``NumericError``
(estimation failure, exit 3).
"""


class ClimFrontError(Exception):
    """Base class for all package errors."""


class DataError(ClimFrontError, ValueError):
    pass


class NumericError(ClimFrontError, ArithmeticError):
    pass


class MissingCoverage(DataError):
    def __init__(self, country):
        self.country = country
        super().__init__(f"no grid cell with positive population weight for {country!r}")


class IncompleteYear(DataError):
    pass


class InsufficientHistory(DataError):
    def __init__(self, message, first_valid_year=None):
        self.first_valid_year = first_valid_year
        super().__init__(message)


class DegenerateVariance(DataError):
    pass


class MissingIncome(DataError):
    pass


class DuplicateKey(DataError):
    pass


class EmptyPanel(DataError):
    pass


class UnknownPreset(DataError, KeyError):
    def __str__(self):
        return self.args[0] if self.args else "unknown preset"


class MissingVariable(DataError, KeyError):
    def __init__(self, name):
        self.name = name
        super().__init__(f"variable {name!r} is not available")

    def __str__(self):
        return self.args[0]


class CollinearDesign(DataError):
    def __init__(self, columns, matrix="X"):
        self.columns = list(columns)
        self.matrix = matrix
        super().__init__(f"rank-deficient {matrix}; dependent columns: {', '.join(self.columns)}")


class EmptyDesign(DataError):
    pass


class MissingGap(DataError):
    pass


class EmptyInput(DataError):
    pass


class InvalidInput(DataError):
    pass


class DimensionError(DataError):
    pass


class TooShort(DataError):
    pass


class DegenerateSeries(NumericError):
    pass


class NoUsableSeries(DataError):
    pass


class NonConvergence(NumericError):
    def __init__(self, message, last=None):
        self.last = last
        super().__init__(message)


class SingularHessian(NumericError):
    pass
