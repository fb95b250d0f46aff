"""State objects on an isospectral orbit and the linear algebra they rest on.

A density operator of rank ``k`` on an ``n``-dimensional space is lifted to
an ``n x k`` matrix ``psi`` with ``psi^† psi = P`` where ``P`` is the diagonal
matrix of the positive eigenvalues in decreasing order.  The orbit of the
state under unitary conjugation is the image of all such ``psi`` under
``psi -> psi psi^†``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    InvalidSpectrum,
    NotAntiHermitian,
    NotGaugeElement,
    NotHermitian,
    NotInFiber,
    NotPositive,
    ShapeMismatch,
    TraceNotOne,
)

__all__ = [
    "Tolerances",
    "DEFAULT_TOL",
    "Spectrum",
    "DensityOperator",
    "BundlePoint",
    "validate_density",
    "spectrum_of",
    "standard_purification",
    "project_to_fiber_tangent",
    "check_gauge_element",
    "expm_antihermitian",
    "dagger",
]


def dagger(a: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(a, -1, -2))


def _frozen(a) -> np.ndarray:
    out = np.array(a, dtype=complex)
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class Tolerances:
    """Absolute Frobenius-norm thresholds used by the validators."""

    tol_trace: float = 1e-9
    tol_herm: float = 1e-10
    tol_psd: float = 1e-10
    tol_fiber: float = 1e-9
    tol_comm: float = 1e-9
    tol_degeneracy: float = 1e-8

    def __post_init__(self):
        for name, value in vars(self).items():
            if not value > 0:
                raise ValueError(f"{name} must be strictly positive, got {value}")


DEFAULT_TOL = Tolerances()


@dataclass(frozen=True)
class Spectrum:
    """Decreasing positive eigenvalues grouped into degeneracy blocks.

    ``eigenvalues`` has one entry per column of a bundle point (length ``k``);
    ``multiplicities`` gives the sizes of the maximal runs of equal values,
    the first run belonging to the largest eigenvalue.
    """

    eigenvalues: tuple
    multiplicities: tuple
    tol: Tolerances = field(default=DEFAULT_TOL, compare=False, repr=False)

    def __post_init__(self):
        p = np.asarray(self.eigenvalues, dtype=float)
        m = tuple(int(x) for x in self.multiplicities)
        object.__setattr__(self, "eigenvalues", tuple(float(x) for x in p))
        object.__setattr__(self, "multiplicities", m)
        if p.ndim != 1 or p.size == 0:
            raise InvalidSpectrum("spectrum must be a non-empty sequence")
        if not np.all(np.isfinite(p)) or np.any(p <= 0):
            raise InvalidSpectrum(f"eigenvalues must be positive, got {p}")
        if np.any(np.diff(p) > 0):
            raise InvalidSpectrum(f"eigenvalues must be non-increasing, got {p}")
        residual = abs(p.sum() - 1.0)
        if residual > self.tol.tol_trace:
            raise InvalidSpectrum(
                f"eigenvalues must sum to one (residual {residual:.3e})", residual
            )
        if any(x <= 0 for x in m) or sum(m) != p.size:
            raise InvalidSpectrum(f"multiplicities {m} do not partition {p.size} values")
        start = 0
        for j, size in enumerate(m):
            run = p[start:start + size]
            if run.max() - run.min() > self.tol.tol_degeneracy:
                raise InvalidSpectrum(f"block {j} is not constant: {run}")
            if j > 0 and p[start - 1] - p[start] <= self.tol.tol_degeneracy:
                raise InvalidSpectrum(f"blocks {j - 1} and {j} are not maximal")
            start += size

    @classmethod
    def from_values(cls, values, tol: Tolerances = DEFAULT_TOL) -> "Spectrum":
        """Sort, cluster and average ``values`` into a spectrum.

        Adjacent values whose gap is at most ``tol.tol_degeneracy`` share a
        block; each block is replaced by its mean so that ``P`` commutes
        exactly with block-diagonal matrices.
        """
        p = np.sort(np.asarray(values, dtype=float))[::-1]
        if p.size == 0:
            raise InvalidSpectrum("spectrum must be a non-empty sequence")
        runs = [[p[0]]]
        for a, b in zip(p[:-1], p[1:]):
            if a - b <= tol.tol_degeneracy:
                runs[-1].append(b)
            else:
                runs.append([b])
        eig = [float(np.mean(r)) for r in runs for _ in r]
        return cls(tuple(eig), tuple(len(r) for r in runs), tol)

    @property
    def values(self) -> np.ndarray:
        return np.array(self.eigenvalues)

    @property
    def rank(self) -> int:
        return len(self.eigenvalues)

    @property
    def P(self) -> np.ndarray:
        return np.diag(self.values).astype(complex)

    @property
    def blocks(self) -> list:
        """Column slices of the degeneracy blocks, largest eigenvalue first."""
        out, start = [], 0
        for size in self.multiplicities:
            out.append(slice(start, start + size))
            start += size
        return out

    @property
    def block_labels(self) -> np.ndarray:
        """Block index of every column."""
        return np.repeat(np.arange(len(self.multiplicities)), self.multiplicities)

    @property
    def block_mask(self) -> np.ndarray:
        """Boolean ``k x k`` mask of the block-diagonal pattern."""
        labels = self.block_labels
        return labels[:, None] == labels[None, :]

    def projectors(self) -> list:
        """The diagonal 0/1 matrices selecting each degeneracy block."""
        out = []
        for s in self.blocks:
            e = np.zeros((self.rank, self.rank))
            e[s, s] = np.eye(s.stop - s.start)
            out.append(e)
        return out

    def matches(self, other: "Spectrum", tol: float) -> bool:
        if self.rank != other.rank:
            return False
        return bool(np.max(np.abs(self.values - other.values)) <= tol)


@dataclass(frozen=True)
class DensityOperator:
    matrix: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "matrix", _frozen(self.matrix))

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


@dataclass(frozen=True)
class BundlePoint:
    """An ``n x k`` matrix ``psi`` with ``psi^† psi = P(spectrum)``."""

    matrix: np.ndarray
    spectrum: Spectrum
    tol: Tolerances = field(default=DEFAULT_TOL, compare=False, repr=False)

    def __post_init__(self):
        psi = _frozen(self.matrix)
        object.__setattr__(self, "matrix", psi)
        if psi.ndim != 2 or psi.shape[1] != self.spectrum.rank:
            raise ShapeMismatch(
                f"bundle point must be n x {self.spectrum.rank}, got {psi.shape}"
            )
        if psi.shape[1] > psi.shape[0]:
            raise ShapeMismatch(f"rank {psi.shape[1]} exceeds dimension {psi.shape[0]}")
        residual = np.linalg.norm(dagger(psi) @ psi - self.spectrum.P)
        if residual > self.tol.tol_fiber:
            raise NotInFiber(
                f"psi^† psi differs from P(sigma) by {residual:.3e}", residual
            )

    @property
    def shape(self):
        return self.matrix.shape

    def project(self) -> np.ndarray:
        """The density operator ``psi psi^†`` this point lies over."""
        return self.matrix @ dagger(self.matrix)

    def right_act(self, u: np.ndarray) -> "BundlePoint":
        return BundlePoint(self.matrix @ u, self.spectrum, self.tol)


def validate_density(m, tol: Tolerances = DEFAULT_TOL) -> DensityOperator:
    """Check that ``m`` is a density operator and return its Hermitian part.

    Raises ``NotHermitian``, ``NotPositive`` or ``TraceNotOne`` naming the
    residual that failed.
    """
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ShapeMismatch(f"density operator must be square, got {m.shape}")
    if not np.all(np.isfinite(m)):
        raise NotHermitian("matrix has non-finite entries")
    herm = np.linalg.norm(m - dagger(m))
    if herm > tol.tol_herm:
        raise NotHermitian(f"||M - M^†|| = {herm:.3e} exceeds {tol.tol_herm:g}", herm)
    sym = 0.5 * (m + dagger(m))
    lowest = float(np.linalg.eigvalsh(sym)[0])
    if lowest < -tol.tol_psd:
        raise NotPositive(f"smallest eigenvalue {lowest:.3e} is negative", -lowest)
    trace_res = abs(np.trace(sym).real - 1.0)
    if trace_res > tol.tol_trace:
        raise TraceNotOne(f"|Tr M - 1| = {trace_res:.3e}", trace_res)
    return DensityOperator(sym)


def _as_matrix(rho) -> np.ndarray:
    return rho.matrix if isinstance(rho, DensityOperator) else np.asarray(rho, dtype=complex)


def spectrum_of(rho, tol: Tolerances = DEFAULT_TOL) -> Spectrum:
    """Positive eigenvalues of ``rho`` in decreasing order with their blocks.

    Eigenvalues at or below ``tol.tol_psd`` count as zero and are dropped.
    """
    w = np.linalg.eigvalsh(_as_matrix(rho))
    return Spectrum.from_values(w[w > tol.tol_psd], tol)


def standard_purification(rho, tol: Tolerances = DEFAULT_TOL) -> BundlePoint:
    """A point in the fiber over ``rho``: eigenvectors scaled by ``sqrt(p)``.

    Inside a degenerate block the eigenvector basis is whatever the eigensolver
    returns; any other choice differs by a gauge transformation.
    """
    m = _as_matrix(rho)
    spectrum = spectrum_of(m, tol)
    w, v = np.linalg.eigh(m)
    order = np.argsort(w)[::-1][: spectrum.rank]
    psi = v[:, order] * np.sqrt(spectrum.values)[None, :]
    return BundlePoint(psi, spectrum, tol)


def project_to_fiber_tangent(psi: BundlePoint, m) -> np.ndarray:
    """Remove the component of ``m`` that violates ``psi^† X + X^† psi = 0``."""
    a = psi.matrix
    m = np.asarray(m, dtype=complex)
    if m.shape != a.shape:
        raise ShapeMismatch(f"tangent must have shape {a.shape}, got {m.shape}")
    h = 0.5 * (dagger(a) @ m + dagger(m) @ a)
    return m - a @ (h / psi.spectrum.values[:, None])


def check_gauge_element(xi, spectrum: Spectrum, tol: Tolerances = DEFAULT_TOL) -> np.ndarray:
    """Return ``xi`` as an array after checking it lies in the gauge algebra."""
    xi = np.asarray(xi, dtype=complex)
    k = spectrum.rank
    if xi.shape != (k, k):
        raise ShapeMismatch(f"gauge element must be {k} x {k}, got {xi.shape}")
    scale = max(1.0, float(np.linalg.norm(xi)))
    herm = np.linalg.norm(xi + dagger(xi))
    if herm > tol.tol_herm * scale:
        raise NotGaugeElement(f"||xi + xi^†|| = {herm:.3e}", herm)
    p = spectrum.values
    comm = np.linalg.norm(xi * p[None, :] - p[:, None] * xi)
    if comm > tol.tol_comm * scale:
        raise NotGaugeElement(f"||[xi, P]|| = {comm:.3e}", comm)
    return xi


def expm_antihermitian(a, tol: Tolerances = DEFAULT_TOL) -> np.ndarray:
    """``exp(a)`` for anti-Hermitian ``a`` through the eigenbasis of ``i a``.

    The result is unitary to working precision because it is assembled as
    ``W diag(exp(-i lambda)) W^†`` with ``W`` unitary.
    """
    a = np.asarray(a, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ShapeMismatch(f"expected a square matrix, got {a.shape}")
    res = np.linalg.norm(a + dagger(a))
    if res > tol.tol_herm * max(1.0, float(np.linalg.norm(a))):
        raise NotAntiHermitian(f"||A + A^†|| = {res:.3e}", res)
    k = 0.5j * (a - dagger(a))
    lam, w = np.linalg.eigh(k)
    return (w * np.exp(-1j * lam)[None, :]) @ dagger(w)
