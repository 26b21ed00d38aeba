"""Exception types raised across the package."""


class DpGuardError(Exception):
    """Base class for all dpguard errors."""


class InvalidVector(DpGuardError, ValueError):
    """Input scores do not form a valid confidence vector."""


class EmptyCandidates(DpGuardError, ValueError):
    """A selection table was requested for an empty candidate set."""


class NotNeighboring(DpGuardError, ValueError):
    """Two vectors do not share a sub-range partition (or their L1 distance exceeds 1)."""


class Degenerate(DpGuardError, ValueError):
    """The fixed-point budget is undefined (constant modified vector, or no positive solution)."""


class NonPositiveScore(DpGuardError, ValueError):
    """A zero or negative score makes the log-ratio seed undefined."""


class LengthMismatch(DpGuardError, ValueError):
    """Two vectors that must share a length do not."""


class Unachievable(DpGuardError, ValueError):
    """The requested distortion target exceeds what any budget on that side can produce."""


class EmptyRecord(DpGuardError, ValueError):
    """Fingerprinting requires at least one byte."""


class EmptyCohort(DpGuardError, ValueError):
    """An attack was run against an empty cohort."""


class InvalidSpec(DpGuardError, ValueError):
    """Cohort specification violates its invariants."""


class Diverged(DpGuardError, RuntimeError):
    """Gradient descent diverged (learning rate too high)."""


class BudgetExhausted(DpGuardError):
    """The query budget for this record fingerprint is used up."""
