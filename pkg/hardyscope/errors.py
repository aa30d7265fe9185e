"""
Exception hierarchy for hardyscope.

Every service raises a subclass of HardyscopeException so that the experiment
runners and the CLI can turn failures into report verdicts or exit messages.
"""


class HardyscopeException(Exception):
    """Base exception for all hardyscope errors."""


class DomainError(HardyscopeException):
    """An argument lies outside the domain of an operation (t <= 0, bad window)."""


class SpectralSolverError(HardyscopeException):
    """The tridiagonal eigensolver failed."""


class SingularOperatorError(HardyscopeException):
    """The operator has a zero (or negative) eigenvalue where an inverse is needed."""


class RefinementNeededError(HardyscopeException):
    """A stopping rule cannot be satisfied at the finest admissible level."""


class FamilyInvalidError(HardyscopeException):
    """A cube family violates coverage, disjointness or partition requirements."""


class DegenerateInputError(HardyscopeException):
    """An input function has zero norm where a ratio is requested."""


class RangeError(HardyscopeException):
    """A time, exponent or weight lies outside the range the grid can resolve."""


class PreconditionError(HardyscopeException):
    """An operation's precondition is violated by its arguments."""


class ResolutionError(HardyscopeException):
    """An object is narrower than the grid can resolve."""


class PotentialError(HardyscopeException):
    """A potential specification is invalid or not admissible for the experiment."""


class ConfigError(HardyscopeException):
    """An experiment configuration is invalid."""


class ReportIOError(HardyscopeException):
    """Writing or reading report files failed."""
