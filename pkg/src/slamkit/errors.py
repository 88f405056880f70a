"""Shared exception hierarchy.

Every domain error raised by the toolkit derives from :class:`SlamkitError`
so callers (and the CLI exit-code mapping) can catch one base type.
"""


class SlamkitError(Exception):
    """Base class for all toolkit domain errors."""


class DegeneracyError(SlamkitError):
    """Input configuration does not determine the requested model."""


class NoConsensusError(SlamkitError):
    """Robust estimation found no model with enough inliers."""


class AmbiguityError(SlamkitError):
    """Several candidate solutions remain indistinguishable."""


class SolverFailureError(SlamkitError):
    """A closed-form solver failed on numerically valid input."""
