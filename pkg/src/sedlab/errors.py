"""Exception hierarchy shared across the library.

Two branches matter to callers: ``ValidationError`` means the inputs broke a
documented precondition (the CLI maps it to exit code 3), ``ComputationError``
means the inputs were admissible but the requested result does not exist or
could not be certified (exit code 4).
"""


class SedlabError(Exception):
    """Base class for all library-specific errors."""


class ValidationError(SedlabError, ValueError):
    """An input violated a documented precondition or type invariant."""


class ComputationError(SedlabError, RuntimeError):
    """A well-posed request has no admissible result."""
