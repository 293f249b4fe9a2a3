"""Exception types shared across the package."""


class LatticeCftpError(Exception):
    """Base class for all package errors."""


class InvalidQuery(LatticeCftpError):
    """Malformed event-field query (non-finite or reversed time bounds)."""


class ValidationError(LatticeCftpError):
    """Model description failed validation.

    Carries a list of field-level messages in ``self.messages``.
    """

    def __init__(self, messages):
        if isinstance(messages, str):
            messages = [messages]
        self.messages = list(messages)
        super().__init__("; ".join(self.messages))


class UnsortedEvents(LatticeCftpError):
    """Event list handed to a replay was not sorted by increasing time."""


class PositiveRatesMissing(LatticeCftpError):
    """Operation requires an unconditional positive-rate rule per state."""


class ZeroTotalRate(LatticeCftpError):
    """Operation requires a strictly positive total rate."""


class ModelShapeMismatch(LatticeCftpError):
    """Model rules do not have the structure a frontier map expects."""


class BudgetExceeded(LatticeCftpError):
    """An exploration or closure hit its step/node/point cap.

    ``self.partial`` holds whatever partial object was built, for diagnostics.
    """

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


class CouplingViolation(LatticeCftpError):
    """Replays from distinct initial configurations disagreed at the origin."""


class MissingEValue(LatticeCftpError):
    """A branch event had no resolved value supplied."""


class ScheduleIncomplete(LatticeCftpError):
    """A resolution step needed a point that was not yet resolved."""


class CapExceeded(LatticeCftpError):
    """Exact torus solve would exceed the configured state-count cap."""


class SingularSystem(LatticeCftpError):
    """Stationary linear system was singular."""


class SupportMismatch(LatticeCftpError):
    """Distributions compared on different supports."""
