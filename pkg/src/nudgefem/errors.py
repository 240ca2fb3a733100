"""Exception types shared across the package."""


class InvalidConfigError(ValueError):
    """Raised when run parameters are inconsistent (e.g. k does not divide N)."""


class OutOfDomainError(ValueError):
    """Raised when a point lies outside the unit square."""


class SingularMatrixError(RuntimeError):
    """Raised when a sparse factorization hits a numerically singular pivot."""


class SolverQualityError(RuntimeError):
    """Raised when a solve finishes but residuals exceed the quality gates."""


class DivergedError(RuntimeError):
    """Raised when the time integration produces non-finite values."""

    def __init__(self, step: int, t: float):
        super().__init__(f"non-finite solution at step {step}, t={t:.6g}")
        self.step = step
        self.t = t
