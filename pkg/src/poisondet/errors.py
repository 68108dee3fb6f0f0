"""Exception types shared across the toolkit.

The CLI maps ``ValidationError`` to exit code 1 and I/O problems
(``OSError`` and subclasses) to exit code 2.
"""


class PoisonDetError(Exception):
    """Base class for toolkit errors."""


class ValidationError(PoisonDetError, ValueError):
    """Input violates a documented invariant (bad box, bad score, bad config)."""


class FormatError(ValidationError):
    """A file is syntactically or structurally malformed."""
