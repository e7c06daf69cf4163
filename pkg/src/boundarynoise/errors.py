"""Exception types shared across the package."""


class BoundaryNoiseError(Exception):
    """Base class for all package errors."""


class PreconditionError(BoundaryNoiseError, ValueError):
    """An operation was called with inputs violating its stated preconditions."""


class TruncationMismatchError(PreconditionError):
    """A mode vector or coefficient table does not match the model truncation."""


class SingularResolventError(PreconditionError):
    """The requested resolvent point hits an eigenvalue."""

    def __init__(self, point, mode: int):
        self.point = point
        self.mode = mode
        super().__init__(f"resolvent is singular at lambda={point!r}: hits eigenvalue of mode {mode}")


class UnsupportedRepresentationError(PreconditionError):
    """The operation requires a spectral (diagonal) representation the model does not have."""


class ResolutionError(PreconditionError):
    """A time grid is too coarse for the declared kernel singularity."""


class FactorizationError(BoundaryNoiseError):
    """A covariance matrix could not be factorized within the PSD tolerance."""

    def __init__(self, eigenvalue: float, tolerance: float):
        self.eigenvalue = eigenvalue
        self.tolerance = tolerance
        super().__init__(
            f"covariance factorization failed: eigenvalue {eigenvalue:.6g} below tolerance -{tolerance:.6g}"
        )


class ExistenceGateError(BoundaryNoiseError):
    """Simulation refused because the existence check did not certify convergence."""


class SpecValidationError(BoundaryNoiseError):
    """A model-spec file failed schema validation.

    ``problems`` is a list of ``(field_path, message)`` pairs.
    """

    def __init__(self, problems):
        self.problems = list(problems)
        lines = "; ".join(f"{path or '<root>'}: {msg}" for path, msg in self.problems)
        super().__init__(f"invalid model spec: {lines}")
