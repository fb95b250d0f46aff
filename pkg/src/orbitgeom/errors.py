"""Exception types raised across the package.

Every validation error carries the name of the violated invariant and the
measured residual so command-line front ends can report them verbatim.
"""


class GeometryError(ValueError):
    """Base class for invariant violations."""

    invariant = "unspecified"

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class NotHermitian(GeometryError):
    invariant = "hermitian"


class NotAntiHermitian(GeometryError):
    invariant = "anti-hermitian"


class NotPositive(GeometryError):
    invariant = "positive-semidefinite"


class TraceNotOne(GeometryError):
    invariant = "unit-trace"


class InvalidSpectrum(GeometryError):
    invariant = "spectrum"


class NotInFiber(GeometryError):
    invariant = "fiber-condition"


class NotGaugeElement(GeometryError):
    invariant = "gauge-algebra"


class NotTangent(GeometryError):
    invariant = "tangency"


class ShapeMismatch(GeometryError):
    invariant = "shape"


class IllConditionedSpectrum(GeometryError):
    invariant = "minimum-eigenvalue"


class NotIsospectral(GeometryError):
    invariant = "isospectral"


class InvalidGrid(GeometryError):
    invariant = "time-grid"


class PhaseUndefined(ArithmeticError):
    """The holonomy trace is too close to zero for its argument to mean anything."""


class GridTooCoarse(RuntimeError):
    """The horizontality residual did not shrink when the time grid was refined."""
