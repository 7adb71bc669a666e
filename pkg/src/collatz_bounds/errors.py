"""Exception types shared across the package."""


class CollatzBoundsError(Exception):
    """Base class for all errors raised by this package."""


class BudgetExceeded(CollatzBoundsError):
    """A trajectory did not resolve within the caller's iteration budget."""


class IterationLimit(CollatzBoundsError):
    """Elimination performed more splits than the configured cap."""


class MalformedTree(CollatzBoundsError):
    pass


class MissingVariable(CollatzBoundsError):
    pass


class PrecisionExhausted(CollatzBoundsError):
    """Feasibility could not be certified either way at the maximum precision."""


class CycleTarget(CollatzBoundsError):
    """The target lies on the trivial cycle {1, 2}."""


class CertificateError(CollatzBoundsError):
    """A constructed certificate failed verification."""
