"""Unitary evolution, horizontal lifts and the operational geometric phase.

Time evolution follows ``i d(rho)/dt = [H, rho]``: energies are measured in
units of inverse time and no Planck constant appears in the propagator.  The
``hbar`` of a :class:`~orbitgeom.geometry.GeometryContext` only scales the
metric.

Horizontal lift
---------------
Write the lift as ``psi_h(t) = psi(t) V(t)`` with ``psi(t) = U(t) psi0`` and
``V(t)`` in the gauge group.  The connection form transforms as::

    A_{psi V}(X V + psi dV) = V^† (A_psi(X) + dV V^†) V

so ``psi_h`` is horizontal exactly when ``dV/dt = -A_psi(dpsi/dt) V``.  The
solution is the time-ordered exponential with later factors on the left,
approximated on a grid by ``V_{i+1} = exp(-A_i dt_i) V_i`` with ``A_i`` taken
at the midpoint of each interval.  For a piecewise-constant Hamiltonian whose
breakpoints are grid nodes the generator is constant on every interval, so
each factor is exact.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .core import (
    DEFAULT_TOL,
    BundlePoint,
    DensityOperator,
    Spectrum,
    Tolerances,
    dagger,
    standard_purification,
    validate_density,
)
from .errors import (
    GridTooCoarse,
    InvalidGrid,
    NotHermitian,
    NotInFiber,
    NotTangent,
    PhaseUndefined,
    ShapeMismatch,
)
from .geometry import GeometryContext, block_diagonal_part

__all__ = [
    "HamiltonianPath",
    "LiftedTrajectory",
    "time_grid",
    "propagate_von_neumann",
    "lift_unitary_curve",
    "horizontalize",
    "horizontal_lift",
    "horizontality_residuals",
    "refinement_probe",
    "holonomy",
    "operational_geometric_phase",
    "holonomy_trace",
]

PHASE_FLOOR = 1e-12


@dataclass(frozen=True)
class HamiltonianPath:
    """Constant or piecewise-constant Hermitian Hamiltonian.

    ``times is None`` marks a constant Hamiltonian valid at all times; otherwise
    ``matrices[i]`` acts on ``[times[i], times[i + 1])``.
    """

    matrices: np.ndarray
    times: np.ndarray | None = None
    tol: Tolerances = field(default=DEFAULT_TOL, repr=False, compare=False)

    def __post_init__(self):
        h = np.array(self.matrices, dtype=complex)
        if h.ndim == 2:
            h = h[None]
        if h.ndim != 3 or h.shape[1] != h.shape[2]:
            raise ShapeMismatch(f"Hamiltonians must be square, got {h.shape}")
        if not np.all(np.isfinite(h)):
            raise NotHermitian("Hamiltonian has non-finite entries")
        for i, m in enumerate(h):
            res = np.linalg.norm(m - dagger(m))
            if res > self.tol.tol_herm * max(1.0, float(np.linalg.norm(m))):
                raise NotHermitian(f"segment {i}: ||H - H^†|| = {res:.3e}", res)
        h = 0.5 * (h + dagger(h))
        h.flags.writeable = False
        object.__setattr__(self, "matrices", h)
        if self.times is None:
            if h.shape[0] != 1:
                raise InvalidGrid("a constant Hamiltonian has exactly one matrix")
            return
        t = np.array(self.times, dtype=float)
        if t.ndim != 1 or t.size != h.shape[0] + 1:
            raise InvalidGrid(f"need {h.shape[0] + 1} breakpoints, got {t.size}")
        if not np.all(np.isfinite(t)) or np.any(np.diff(t) <= 0):
            raise InvalidGrid("breakpoints must be finite and strictly increasing")
        t.flags.writeable = False
        object.__setattr__(self, "times", t)

    @classmethod
    def constant(cls, h, tol: Tolerances = DEFAULT_TOL) -> "HamiltonianPath":
        return cls(np.asarray(h)[None], None, tol)

    @classmethod
    def sampled(cls, times, matrices, tol: Tolerances = DEFAULT_TOL) -> "HamiltonianPath":
        return cls(matrices, times, tol)

    @property
    def dim(self) -> int:
        return self.matrices.shape[1]

    @property
    def is_constant(self) -> bool:
        return self.times is None

    def map(self, fn) -> "HamiltonianPath":
        """Apply ``fn`` to every segment matrix."""
        return HamiltonianPath(np.array([fn(m) for m in self.matrices]), self.times, self.tol)

    def segment_indices(self, grid) -> np.ndarray:
        """Segment index of every grid interval; the grid must refine the path."""
        grid = np.asarray(grid, dtype=float)
        n = grid.size - 1
        if self.times is None:
            return np.zeros(n, dtype=int)
        t = self.times
        span = max(abs(t[-1] - t[0]), 1.0)
        slack = 1e-12 * span
        if grid[0] < t[0] - slack or grid[-1] > t[-1] + slack:
            raise InvalidGrid(
                f"grid [{grid[0]}, {grid[-1]}] leaves the Hamiltonian's domain [{t[0]}, {t[-1]}]"
            )
        inner = t[(t > grid[0] + slack) & (t < grid[-1] - slack)]
        if inner.size:
            gap = np.min(np.abs(inner[:, None] - grid[None, :]), axis=1)
            if np.any(gap > slack):
                raise InvalidGrid("time grid does not contain every Hamiltonian breakpoint")
        mids = 0.5 * (grid[:-1] + grid[1:])
        return np.clip(np.searchsorted(t, mids, side="right") - 1, 0, len(self.matrices) - 1)


def time_grid(t0: float, t1: float, steps: int, path: HamiltonianPath | None = None) -> np.ndarray:
    """Uniform grid with ``steps`` intervals, plus any breakpoints of ``path``."""
    if steps < 1:
        raise InvalidGrid(f"steps must be positive, got {steps}")
    if not t1 >= t0:
        raise InvalidGrid(f"need t1 >= t0, got {t0}, {t1}")
    if t1 == t0:
        return np.array([float(t0)])
    grid = np.linspace(t0, t1, steps + 1)
    if path is not None and path.times is not None:
        inner = path.times[(path.times > t0) & (path.times < t1)]
        grid = np.unique(np.concatenate([grid, inner]))
    return grid


def _check_grid(grid) -> np.ndarray:
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size < 1:
        raise InvalidGrid("grid must be a non-empty 1-d sequence")
    if np.any(np.diff(grid) <= 0) and grid.size > 1:
        raise InvalidGrid("grid must be strictly increasing")
    return grid


def _step_unitaries(path: HamiltonianPath, grid: np.ndarray, fraction: float = 1.0) -> np.ndarray:
    """``exp(-i H_i fraction dt_i)`` for every grid interval, stacked."""
    seg = path.segment_indices(grid)
    lam, w = np.linalg.eigh(path.matrices)
    dt = np.diff(grid) * fraction
    phases = np.exp(-1j * lam[seg] * dt[:, None])
    ws = w[seg]
    return np.einsum("tij,tj,tkj->tik", ws, phases, np.conj(ws))


def propagate_von_neumann(path: HamiltonianPath, rho0, grid) -> np.ndarray:
    """Density matrices on ``grid``, shape ``(len(grid), n, n)``.

    ``rho(t_{i+1}) = U_i rho(t_i) U_i^†`` with ``U_i = exp(-i H_i dt_i)``.

    The eigenbasis of ``rho0`` is carried along instead of ``rho`` itself and
    snapped back to the nearest unitary after every step.  In exact arithmetic
    this is the same update; in floating point it stops the round-off in each
    ``U_i`` from accumulating into trace and spectrum drift.
    """
    grid = _check_grid(grid)
    if not isinstance(rho0, DensityOperator):
        rho0 = validate_density(rho0)
    if rho0.dim != path.dim:
        raise ShapeMismatch(f"state has dimension {rho0.dim}, Hamiltonian {path.dim}")
    us = _step_unitaries(path, grid)
    out = np.empty((grid.size, path.dim, path.dim), dtype=complex)
    out[0] = rho0.matrix
    w, v = np.linalg.eigh(rho0.matrix)
    for i, u in enumerate(us):
        a, _, bh = np.linalg.svd(u @ v)
        v = a @ bh
        r = (v * w[None, :]) @ dagger(v)
        out[i + 1] = 0.5 * (r + dagger(r))
    return out


@dataclass(frozen=True)
class LiftedTrajectory:
    """A curve ``psi(t)`` in the bundle together with gauge factors ``V(t)``.

    The corrected curve is ``psi(t) V(t)``; ``V`` is the identity until
    :func:`horizontalize` fills it.  ``residuals[i]`` is the horizontality
    residual on interval ``i`` (see :func:`horizontality_residuals`).
    """

    grid: np.ndarray
    points: np.ndarray
    gauge_factors: np.ndarray
    spectrum: Spectrum
    hamiltonian: HamiltonianPath
    hbar: float = 0.5
    residuals: np.ndarray | None = None

    @property
    def horizontal_points(self) -> np.ndarray:
        return self.points @ self.gauge_factors

    @property
    def steps(self) -> int:
        return self.grid.size - 1

    def fiber_residual(self) -> float:
        """Largest ``||Y^† Y - P||`` over both the raw and corrected curve."""
        p = self.spectrum.P
        raw = np.linalg.norm(dagger(self.points) @ self.points - p, axis=(1, 2))
        hor = self.horizontal_points
        cor = np.linalg.norm(dagger(hor) @ hor - p, axis=(1, 2))
        return float(max(raw.max(), cor.max()))

    def bundle_point(self, i: int, horizontal: bool = True) -> BundlePoint:
        m = self.horizontal_points[i] if horizontal else self.points[i]
        return BundlePoint(m, self.spectrum)


def lift_unitary_curve(path: HamiltonianPath, psi0: BundlePoint, grid, hbar: float = 0.5) -> LiftedTrajectory:
    """The raw lift ``psi(t) = U(t) psi0``; its projection solves the von Neumann equation."""
    grid = _check_grid(grid)
    a = psi0.matrix
    if a.shape[0] != path.dim:
        raise ShapeMismatch(f"bundle point has {a.shape[0]} rows, Hamiltonian dimension {path.dim}")
    us = _step_unitaries(path, grid)
    pts = np.empty((grid.size,) + a.shape, dtype=complex)
    pts[0] = a
    for i, u in enumerate(us):
        pts[i + 1] = u @ pts[i]
    k = a.shape[1]
    eye = np.broadcast_to(np.eye(k, dtype=complex), (grid.size, k, k)).copy()
    return LiftedTrajectory(grid, pts, eye, psi0.spectrum, path, hbar)


def _expm_antihermitian_stack(a: np.ndarray) -> np.ndarray:
    k = 0.5j * (a - dagger(a))
    lam, w = np.linalg.eigh(k)
    return np.einsum("tij,tj,tkj->tik", w, np.exp(-1j * lam), np.conj(w))


def horizontality_residuals(ys: np.ndarray, grid, spectrum: Spectrum) -> np.ndarray:
    """Size of the connection form on the sampled velocity, per interval.

    For interval ``i`` the velocity is the forward difference
    ``(Y_{i+1} - Y_i) / dt_i``, projected onto the tangent space at ``Y_i``;
    the residual is the Frobenius norm of the connection form applied to it.
    Exactly horizontal curves give residuals of second order in the step.
    """
    dt = np.diff(np.asarray(grid, dtype=float))
    d = (ys[1:] - ys[:-1]) / dt[:, None, None]
    m = dagger(ys[:-1]) @ d
    anti = 0.5 * (m - dagger(m))
    a = block_diagonal_part(anti, spectrum) / spectrum.values[None, None, :]
    return np.linalg.norm(a, axis=(1, 2))


def horizontalize(traj: LiftedTrajectory, ctx: GeometryContext) -> LiftedTrajectory:
    """Fill the gauge factors so that ``psi(t) V(t)`` is horizontal."""
    if not ctx.spectrum.matches(traj.spectrum, ctx.tol.tol_degeneracy):
        raise ShapeMismatch("geometry context and trajectory have different spectra")
    grid = traj.grid
    path = traj.hamiltonian
    k = traj.spectrum.rank
    if grid.size < 2:
        return replace(traj, hbar=ctx.hbar, residuals=np.zeros(0))
    seg = path.segment_indices(grid)
    half = _step_unitaries(path, grid, 0.5)
    mid = half @ traj.points[:-1]
    vel = -1j * path.matrices[seg] @ mid
    gen = block_diagonal_part(dagger(mid) @ vel, ctx.spectrum) / ctx.spectrum.values[None, None, :]
    norms = np.maximum(1.0, np.linalg.norm(gen, axis=(1, 2)))
    defect = np.linalg.norm(gen + dagger(gen), axis=(1, 2))
    if np.any(defect > ctx.tol.tol_fiber * norms):
        raise NotTangent(f"non-tangent lift velocity (defect {defect.max():.3e})", float(defect.max()))
    dt = np.diff(grid)
    factors = _expm_antihermitian_stack(-gen * dt[:, None, None])
    v = np.empty((grid.size, k, k), dtype=complex)
    v[0] = np.eye(k)
    for i, f in enumerate(factors):
        v[i + 1] = f @ v[i]
    res = horizontality_residuals(traj.points @ v, grid, ctx.spectrum)
    return replace(traj, gauge_factors=v, hbar=ctx.hbar, residuals=res)


def _resolve_start(rho0, psi0, ctx, tol):
    if not isinstance(rho0, DensityOperator):
        rho0 = validate_density(rho0, tol)
    if psi0 is None:
        psi0 = standard_purification(rho0, tol)
    elif not isinstance(psi0, BundlePoint):
        spectrum = ctx.spectrum if ctx is not None else standard_purification(rho0, tol).spectrum
        psi0 = BundlePoint(psi0, spectrum, tol)
    res = np.linalg.norm(psi0.project() - rho0.matrix)
    if res > tol.tol_fiber:
        raise NotInFiber(f"psi0 does not lie over rho0 (residual {res:.3e})", res)
    if ctx is None:
        ctx = GeometryContext(psi0.spectrum, tol=tol)
    return rho0, psi0, ctx


def horizontal_lift(path: HamiltonianPath, rho0, t0: float, t1: float, steps: int,
                    ctx: GeometryContext | None = None, psi0=None,
                    tol: Tolerances = DEFAULT_TOL) -> LiftedTrajectory:
    """Raw lift from ``psi0`` (default: standard purification) made horizontal."""
    rho0, psi0, ctx = _resolve_start(rho0, psi0, ctx, tol)
    grid = time_grid(t0, t1, steps, path)
    return horizontalize(lift_unitary_curve(path, psi0, grid, ctx.hbar), ctx)


def refinement_probe(path: HamiltonianPath, rho0, t0: float, t1: float, steps: int,
                     ctx: GeometryContext | None = None, psi0=None, floor: float = 1e-10):
    """Maximum residuals at ``steps`` and ``2 * steps`` and their ratio.

    Raises ``GridTooCoarse`` if the residual is above ``floor`` and does not
    decrease when the grid is refined.
    """
    coarse = horizontal_lift(path, rho0, t0, t1, steps, ctx, psi0)
    fine = horizontal_lift(path, rho0, t0, t1, 2 * steps, ctx, psi0)
    rc = float(coarse.residuals.max()) if coarse.residuals.size else 0.0
    rf = float(fine.residuals.max()) if fine.residuals.size else 0.0
    if rc > floor and rf >= rc:
        raise GridTooCoarse(
            f"horizontality residual did not shrink under refinement ({rc:.3e} -> {rf:.3e})"
        )
    ratio = rf / rc if rc > 0 else float("nan")
    return rc, rf, ratio


def holonomy(path: HamiltonianPath, rho0, t0: float, t1: float, steps: int = 1000,
             ctx: GeometryContext | None = None, psi0=None) -> np.ndarray:
    """``psi0^† psi_h(t1)`` for the horizontal lift starting at ``psi0``."""
    traj = horizontal_lift(path, rho0, t0, t1, steps, ctx, psi0)
    return dagger(traj.points[0]) @ traj.horizontal_points[-1]


def operational_geometric_phase(path: HamiltonianPath, rho0, t0: float, t1: float,
                                steps: int = 1000, ctx: GeometryContext | None = None,
                                psi0=None) -> float:
    """``arg Tr(psi0^† psi_h(t1))`` in ``(-pi, pi]``.

    Raises ``PhaseUndefined`` when the trace is smaller than ``1e-12``.
    """
    traj = horizontal_lift(path, rho0, t0, t1, steps, ctx, psi0)
    return phase_of(holonomy_trace(traj))


def holonomy_trace(traj: LiftedTrajectory) -> complex:
    """``Tr(psi0^† psi_h(t1))``, exactly real when the lift returns to ``psi0``."""
    return complex(np.vdot(traj.points[0], traj.horizontal_points[-1]))


def phase_of(z: complex) -> float:
    if abs(z) < PHASE_FLOOR:
        raise PhaseUndefined(f"|holonomy trace| = {abs(z):.3e} is below {PHASE_FLOOR:g}")
    g = float(np.angle(z))
    return np.pi if g <= -np.pi else g
