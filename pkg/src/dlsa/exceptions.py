"""Exception and warning types shared across the package."""

from __future__ import annotations


class DlsaError(Exception):
    """Base class for all errors raised by this package."""


class DimensionMismatch(DlsaError):
    """Input shapes are inconsistent with each other or with the model."""


class NonConvergence(DlsaError):
    """Iterative fitting hit its iteration or line-search budget."""


class SingularHessian(DlsaError):
    """A Newton step could not be solved; covariates are likely collinear."""


class NonPositiveDefinite(DlsaError):
    """A matrix that must be positive definite failed its Cholesky check."""


class TooFewRows(DlsaError):
    """Not enough rows to split into the requested number of partitions."""


class InputError(DlsaError):
    """Malformed input data (CSV contents, envelope bytes, ...).

    ``line`` is the 1-based line number of the offending record when known.
    """

    def __init__(self, message: str, line: int | None = None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


class ChecksumMismatch(InputError):
    """A serialized worker summary failed its checksum on decode."""


class ConfigError(DlsaError):
    """Invalid run configuration (flags, schema/family mismatch, ...)."""


class ScenarioAborted(DlsaError):
    """Too many replications of a simulation scenario failed."""


class IllConditionedSolve(UserWarning):
    """A positive-definite solve fell back to an eigenvalue pseudo-solve."""


class ZeroCoefficientPinned(UserWarning):
    """A combined coefficient is exactly zero; its adaptive penalty weight is
    infinite, so the coefficient is held at zero along the whole path."""
