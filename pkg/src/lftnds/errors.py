"""Exception and warning types raised by the verification engine."""


class LftNdsError(Exception):
    """Base class for all engine errors."""


class InvalidInput(LftNdsError, ValueError):
    pass


class InvalidModel(LftNdsError, ValueError):
    pass


class InvalidParameter(InvalidModel):
    pass


class NotWellPosed(LftNdsError):
    pass


class NotRegular(LftNdsError):
    pass


class ConsistencyError(LftNdsError):
    pass


class StructureMismatch(LftNdsError):
    pass


class AssumptionViolated(LftNdsError):
    pass


class UnsupportedByOracle(LftNdsError):
    pass


class RefusedTooLarge(LftNdsError):
    pass


class IllConditioned(UserWarning):
    """A rank decision was close to the tolerance threshold."""
