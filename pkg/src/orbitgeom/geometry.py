"""Metric, symplectic form and mechanical connection on the purification bundle.

Tangent vectors at ``psi`` are ``n x k`` arrays ``X`` with
``psi^† X + X^† psi = 0``.  Gauge algebra elements are ``k x k`` anti-Hermitian
arrays that are block diagonal in the degeneracy blocks of the spectrum.

Conventions
-----------
The metric is ``G(X, Y) = hbar Tr(X^† Y + Y^† X)`` and the moment of inertia is
defined as ``I(xi, eta) = G(psi xi, psi eta)``, which evaluates to
``hbar Tr((xi^† eta + eta^† xi) P)`` for every ``psi`` in the fiber.  With the
default ``hbar = 1/2`` this is ``(1/2) Tr((xi^† eta + eta^† xi) P)``.  The
connection form ``A = I^{-1} J`` does not depend on ``hbar``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import DEFAULT_TOL, BundlePoint, Spectrum, Tolerances, check_gauge_element, dagger
from .errors import IllConditionedSpectrum, NotTangent, ShapeMismatch

__all__ = [
    "GeometryContext",
    "CovectorOnGauge",
    "metric_G",
    "symplectic_Omega",
    "infinitesimal_generator",
    "moment_of_inertia",
    "moment_map",
    "connection_form",
    "vertical_projection",
    "horizontal_projection",
    "block_diagonal_part",
]


@dataclass(frozen=True)
class GeometryContext:
    spectrum: Spectrum
    hbar: float = 0.5
    min_eigenvalue: float = 1e-8
    tol: Tolerances = field(default=DEFAULT_TOL, repr=False)

    def __post_init__(self):
        if not self.hbar > 0:
            raise ValueError(f"hbar must be positive, got {self.hbar}")
        smallest = min(self.spectrum.eigenvalues)
        if smallest < self.min_eigenvalue:
            raise IllConditionedSpectrum(
                f"smallest eigenvalue {smallest:.3e} is below {self.min_eigenvalue:g}; "
                "the connection form would amplify round-off",
                smallest,
            )

    @property
    def projectors(self) -> list:
        return self.spectrum.projectors()

    @property
    def P_inv(self) -> np.ndarray:
        return np.diag(1.0 / self.spectrum.values)

    def with_hbar(self, hbar: float) -> "GeometryContext":
        return GeometryContext(self.spectrum, hbar, self.min_eigenvalue, self.tol)


def block_diagonal_part(m: np.ndarray, spectrum: Spectrum) -> np.ndarray:
    """``sum_j E_j m E_j``; works on stacks of ``k x k`` matrices."""
    return np.where(spectrum.block_mask, m, 0)


@dataclass(frozen=True)
class CovectorOnGauge:
    """Linear functional ``xi -> Re Tr(R^† xi)`` on the gauge algebra."""

    riesz: np.ndarray
    spectrum: Spectrum

    def __post_init__(self):
        r = block_diagonal_part(np.asarray(self.riesz, dtype=complex), self.spectrum)
        object.__setattr__(self, "riesz", r)

    def __call__(self, xi) -> float:
        return float(np.real(np.vdot(self.riesz, np.asarray(xi))))


def _matrix(psi) -> np.ndarray:
    return psi.matrix if isinstance(psi, BundlePoint) else np.asarray(psi, dtype=complex)


def _pair(x, y):
    x = np.asarray(x, dtype=complex)
    y = np.asarray(y, dtype=complex)
    if x.shape != y.shape:
        raise ShapeMismatch(f"tangent shapes differ: {x.shape} vs {y.shape}")
    return np.vdot(x, y)


def metric_G(ctx: GeometryContext, x, y) -> float:
    """``hbar Tr(X^† Y + Y^† X)``."""
    return 2.0 * ctx.hbar * float(np.real(_pair(x, y)))


def symplectic_Omega(ctx: GeometryContext, x, y) -> float:
    """``-i hbar Tr(X^† Y - Y^† X)``, which is real."""
    return 2.0 * ctx.hbar * float(np.imag(_pair(x, y)))


def infinitesimal_generator(psi: BundlePoint, xi) -> np.ndarray:
    """The vertical vector ``psi xi`` generated by ``xi`` at ``psi``."""
    xi = check_gauge_element(xi, psi.spectrum, psi.tol)
    return psi.matrix @ xi


def moment_of_inertia(ctx: GeometryContext, xi, eta) -> float:
    xi = check_gauge_element(xi, ctx.spectrum, ctx.tol)
    eta = check_gauge_element(eta, ctx.spectrum, ctx.tol)
    p = ctx.spectrum.values
    s = dagger(xi) @ eta + dagger(eta) @ xi
    return ctx.hbar * float(np.real(np.sum(np.diag(s) * p)))


def _check_shapes(ctx, a, x):
    if a.shape[1] != ctx.spectrum.rank:
        raise ShapeMismatch(f"bundle point has {a.shape[1]} columns, spectrum rank {ctx.spectrum.rank}")
    if x.shape != a.shape:
        raise ShapeMismatch(f"tangent must have shape {a.shape}, got {x.shape}")


def moment_map(ctx: GeometryContext, psi, x) -> CovectorOnGauge:
    """``J(X) . xi = G(X, psi xi)`` as a Riesz matrix on the gauge algebra."""
    a = _matrix(psi)
    x = np.asarray(x, dtype=complex)
    _check_shapes(ctx, a, x)
    m = dagger(a) @ x
    anti = 0.5 * (m - dagger(m))
    return CovectorOnGauge(2.0 * ctx.hbar * anti, ctx.spectrum)


def connection_form(ctx: GeometryContext, psi, x) -> np.ndarray:
    """``sum_j E_j psi^† X E_j P^{-1}``.

    The result is a gauge algebra element whenever ``X`` is tangent; an
    anti-Hermiticity defect larger than ``tol_fiber`` (relative) raises
    ``NotTangent``.
    """
    a = _matrix(psi)
    x = np.asarray(x, dtype=complex)
    _check_shapes(ctx, a, x)
    out = block_diagonal_part(dagger(a) @ x, ctx.spectrum) / ctx.spectrum.values[None, :]
    defect = np.linalg.norm(out + dagger(out))
    if defect > ctx.tol.tol_fiber * max(1.0, float(np.linalg.norm(out))):
        raise NotTangent(f"connection form is not anti-Hermitian (defect {defect:.3e})", defect)
    return out


def vertical_projection(ctx: GeometryContext, psi, x) -> np.ndarray:
    return _matrix(psi) @ connection_form(ctx, psi, x)


def horizontal_projection(ctx: GeometryContext, psi, x) -> np.ndarray:
    return np.asarray(x, dtype=complex) - vertical_projection(ctx, psi, x)
