"""Exception types raised by the library."""


class BFinitoError(Exception):
    """Base class for all library errors."""


class DomainError(BFinitoError, ValueError):
    """A point lies outside the (interior of the) domain it is required to be in."""


class InvalidKernelError(BFinitoError, ValueError):
    pass


class InvalidDataError(BFinitoError, ValueError):
    pass


class StepsizeError(BFinitoError, ValueError):
    """A stepsize violates gamma in (0, N / L)."""


class PreconditionError(BFinitoError, ValueError):
    pass


class ParameterError(BFinitoError, ValueError):
    pass


class ScheduleError(BFinitoError, ValueError):
    """An index set is empty or violates the sampling contract."""


class SizeError(BFinitoError, ValueError):
    pass


class UsageError(BFinitoError):
    """Inconsistent command-line configuration."""
