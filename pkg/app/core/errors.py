"""Exception hierarchy shared by every service.

Each error also derives from the closest builtin so callers can catch either.
"""


class PurifyError(Exception):
    """Root of all domain errors."""


class InvalidInputError(PurifyError, ValueError):
    """A precondition on an operation's inputs does not hold."""


class DimensionMismatchError(InvalidInputError):
    pass


class NotNormalizedError(InvalidInputError):
    pass


class MarginalError(InvalidInputError):
    """Marginals are not strictly positive probability vectors."""


class OracleTooLargeError(InvalidInputError):
    pass


class NoiseSpecError(InvalidInputError):
    pass


class LengthMismatchError(InvalidInputError):
    pass


class EmptyDatasetError(InvalidInputError):
    pass


class MissingLabelsError(InvalidInputError):
    pass


class DegenerateBasisError(InvalidInputError):
    pass


class RatioDomainError(InvalidInputError):
    """Parameters fall outside the region where the closed-form ratios are defined."""


class SinkhornNumericalError(PurifyError, ArithmeticError):
    """NaN or underflow in the scaling iterations; retry with log_domain=True."""


class InfiniteLossError(PurifyError, ArithmeticError):
    pass


class DivergenceError(PurifyError, ArithmeticError):
    def __init__(self, message: str, iteration: int):
        super().__init__(f"{message} (iteration {iteration})")
        self.iteration = iteration


class EmbeddingFormatError(PurifyError, ValueError):
    pass


class TruncatedPayloadError(EmbeddingFormatError):
    def __init__(self, expected: int, actual: int):
        super().__init__(
            f"Truncated embedding payload: expected {expected} bytes, found {actual}"
        )
        self.expected = expected
        self.actual = actual


class ChecksumMismatchError(EmbeddingFormatError):
    pass


class ReportError(PurifyError, OSError):
    pass


class UsageError(PurifyError):
    """Bad command line; the CLI exits with status 1."""
