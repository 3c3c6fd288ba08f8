"""Exception types shared across the package."""


class SmddError(Exception):
    """Base class for package-specific errors."""


class DegenerateDistanceError(SmddError, ValueError):
    """A pairwise distance is zero or negative, signalling duplicated points."""


class DegenerateOutputError(SmddError, ValueError):
    """One or more response columns are constant and carry no information.

    The offending column indices are available as ``columns``.
    """

    def __init__(self, columns):
        self.columns = tuple(int(c) for c in columns)
        super().__init__(f"constant response column(s): {list(self.columns)}")


class IllConditionedError(SmddError, RuntimeError):
    """Correlation matrix stayed numerically singular after jitter escalation."""


class ExhaustedCandidatesError(SmddError, RuntimeError):
    """No admissible candidate point remains in the pool."""


class ProtocolError(SmddError, RuntimeError):
    """ask/tell called out of order, or tell does not match the pending ask."""


class DesignComplete(SmddError, RuntimeError):
    """The design already holds its final number of runs."""


class StateFileError(SmddError, RuntimeError):
    """A state file is missing, corrupt, or of an unknown format version."""
