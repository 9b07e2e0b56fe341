"""Shared exception types."""


class ConfigurationError(ValueError):
    """A routine was invoked with an inconsistent or incomplete setup."""


class DegenerateInputError(ValueError):
    """Input is degenerate for the requested computation (e.g. the zero function)."""


class SingularPointError(ValueError):
    """A point lies on the singular set or inside the truncated branch tail."""

    def __init__(self, x, lower=None, upper=None):
        self.x = x
        self.lower = lower
        self.upper = upper
        msg = f"x={x!r} is singular or outside the listed branches"
        if lower is not None or upper is not None:
            msg += f" (nearest branch boundaries: {lower!r}, {upper!r})"
        super().__init__(msg)


class OrbitSingularityError(ValueError):
    """A forward orbit hit the singular set or the truncated tail."""

    def __init__(self, x, step):
        self.x = x
        self.step = step
        super().__init__(f"orbit of x={x!r} is singular at iterate {step}")


class FamilyBoundError(ValueError):
    """An approximation family violates a required per-index bound."""

    def __init__(self, k, value, bound):
        self.k = k
        self.value = value
        self.bound = bound
        super().__init__(
            f"family bound violated at k={k!r}: term {value!r} exceeds M={bound!r}"
        )


class QuadratureToleranceError(RuntimeError):
    """Quadrature failed to meet the requested tolerance."""

    def __init__(self, error, cell, branch):
        self.error = error
        self.cell = cell
        self.branch = branch
        super().__init__(
            f"quadrature error {error:.3e} above tolerance (worst cell {cell}, branch {branch})"
        )


class InsufficientSamplingError(RuntimeError):
    """All sampled orbits became singular before the requested iterate."""
