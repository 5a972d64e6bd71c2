"""Exception hierarchy shared by the simulator, the experiments and the CLI."""


class QOverlapError(ValueError):
    """Base class; every domain error is a ValueError so callers can catch either."""


class InvalidCircuitError(QOverlapError):
    """Gate or measurement indices that do not fit the register."""


class DimensionMismatchError(QOverlapError):
    """Operands with incompatible qubit counts or image shapes."""


class AllZeroImageError(QOverlapError):
    """An image (or block) whose pixels are all zero cannot be amplitude encoded."""


class UndefinedScoreError(QOverlapError):
    """Average overlap requested for two images without any nonzero block."""


class MalformedInputError(QOverlapError):
    """Unparseable or truncated input file, or an out-of-range selector."""


class NoiseBoundError(QOverlapError):
    """Noise strength or readout probability outside its physical bound."""


class ExactModeError(QOverlapError):
    """Noise was requested together with exact (shots = 0) evaluation."""


class FitError(QOverlapError):
    """Least-squares design that cannot determine both parameters."""


# exit status per error class for the CLI; anything else that is a ValueError maps to 1
EXIT_CODES = {
    DimensionMismatchError: 2,
    AllZeroImageError: 2,
    UndefinedScoreError: 2,
}


def exit_code_for(exc: BaseException) -> int:
    for error_type, code in EXIT_CODES.items():
        if isinstance(exc, error_type):
            return code
    return 1
