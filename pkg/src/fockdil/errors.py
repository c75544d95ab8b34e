"""Exception types shared across the package.

Every error raised by the numerical routines derives from FockdilError so
callers (and the CLI) can catch one base class and map it to an exit code.
The subclasses mirror the failure modes of the underlying theory: inputs
that are not positive semidefinite, tuples that are not contractive, power
iterations that fail to settle, and so on.
"""

__all__ = [
    "FockdilError",
    "NotPSD",
    "NotContraction",
    "ConvergenceFailure",
    "NoInvariantVectorState",
    "NotErgodic",
    "NotInvariant",
    "NotReduced",
    "NotConstrained",
    "NotCommuting",
    "InconsistentLifting",
    "BufferTooSmall",
    "DimensionMismatch",
]


class FockdilError(Exception):
    """Base class for all package errors."""


class NotPSD(FockdilError):
    """A matrix expected to be positive semidefinite has a genuinely
    negative eigenvalue (beyond the clamping tolerance)."""


class NotContraction(FockdilError):
    """An operator tuple or block violates its contractivity bound."""


class ConvergenceFailure(FockdilError):
    """An iteration reached its step cap without meeting the tolerance."""


class NoInvariantVectorState(FockdilError):
    """No common unit eigenvector of the adjoint tuple was found."""


class NotErgodic(FockdilError):
    """The fixed-point space of the transfer map is not trivial."""


class NotInvariant(FockdilError):
    """A subspace expected to be invariant fails the residual check."""


class NotReduced(FockdilError):
    """A lifting is not reduced and the caller required reducedness."""


class NotConstrained(FockdilError):
    """An operator tuple violates the supplied polynomial constraints."""


class NotCommuting(FockdilError):
    """A tuple expected to commute does not."""


class InconsistentLifting(FockdilError):
    """The blocks of a lifting are not consistent with any contraction
    between the defect spaces."""


class BufferTooSmall(FockdilError):
    """The truncation level does not leave enough exact levels for the
    requested computation."""


class DimensionMismatch(FockdilError):
    """Operands have incompatible shapes."""
