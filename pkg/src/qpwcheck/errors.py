"""Exception and warning types shared across the package."""


class QPWError(Exception):
    """Base class for all package errors."""


class DimensionMismatchError(QPWError, ValueError):
    pass


class DimensionCapError(QPWError, ValueError):
    """A tensor or operator would exceed the configured dense dimension cap."""


class InvalidStateError(QPWError, ValueError):
    """A vector or matrix violates the state invariants."""


class ParameterError(QPWError, ValueError):
    pass


class ReplayedChallengeError(QPWError):
    """The verifier saw a random string that is already in its ledger.

    This is an administrative rejection, distinct from a failed comparison.
    """


class PasswordRotationRequired(QPWError):
    """The prover has emitted its lifetime quota of states for this password."""


class StateConsumedError(QPWError):
    """A transmitted quantum state was used more than once."""


class RegimeWarning(UserWarning):
    """Parameters leave the region where the security bounds apply (c*d << n)."""
