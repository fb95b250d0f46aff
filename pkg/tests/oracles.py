"""Reference computations that share no code path with the package.

Each routine reaches its answer by a different algorithm than the library:
Jacobi rotations instead of LAPACK, Taylor series instead of eigenbases,
explicit line integrals instead of time-ordered exponentials.
"""

import numpy as np
from scipy.integrate import trapezoid


def jacobi_eigvalsh(h, sweeps=100, tol=1e-15):
    """Eigenvalues of a complex Hermitian matrix by cyclic Jacobi on its real embedding.

    The 2n x 2n real symmetric embedding [[Re, -Im], [Im, Re]] carries every
    eigenvalue twice; one copy of each is returned, ascending.
    """
    h = np.asarray(h, dtype=complex)
    n = h.shape[0]
    a = np.block([[h.real, -h.imag], [h.imag, h.real]]).astype(float)
    m = 2 * n
    for _ in range(sweeps):
        off = np.sqrt(np.sum(a ** 2) - np.sum(np.diag(a) ** 2))
        if off < tol:
            break
        for p in range(m - 1):
            for q in range(p + 1, m):
                if abs(a[p, q]) < 1e-300:
                    continue
                theta = (a[q, q] - a[p, p]) / (2 * a[p, q])
                t = np.sign(theta) / (abs(theta) + np.sqrt(theta ** 2 + 1)) if theta != 0 else 1.0
                c = 1 / np.sqrt(t ** 2 + 1)
                s = t * c
                rot = np.eye(m)
                rot[p, p] = rot[q, q] = c
                rot[p, q] = s
                rot[q, p] = -s
                a = rot.T @ a @ rot
    w = np.sort(np.diag(a))
    return w[::2]


def taylor_expm(a, terms=30):
    """Scaling and squaring with a truncated Taylor series."""
    a = np.asarray(a, dtype=complex)
    norm = np.linalg.norm(a, 1)
    s = max(0, int(np.ceil(np.log2(norm))) + 1) if norm > 0 else 0
    b = a / 2 ** s
    out = np.eye(a.shape[0], dtype=complex)
    term = np.eye(a.shape[0], dtype=complex)
    for j in range(1, terms):
        term = term @ b / j
        out = out + term
    for _ in range(s):
        out = out @ out
    return out


def vertical_fit(psi, x, spectrum, hbar=0.5):
    """Gauge element minimising G(X - psi xi, X - psi xi) by linear least squares.

    The gauge algebra is spanned by real coordinates of block-diagonal
    anti-Hermitian matrices; the G-norm squared is 2 hbar times the Frobenius
    norm squared, so an ordinary least-squares fit on real and imaginary parts
    gives the minimiser.
    """
    k = spectrum.rank
    labels = np.repeat(np.arange(len(spectrum.multiplicities)), spectrum.multiplicities)
    basis = []
    for i in range(k):
        for j in range(i, k):
            if labels[i] != labels[j]:
                continue
            if i == j:
                e = np.zeros((k, k), dtype=complex)
                e[i, i] = 1j
                basis.append(e)
            else:
                e = np.zeros((k, k), dtype=complex)
                e[i, j], e[j, i] = 1, -1
                basis.append(e)
                e = np.zeros((k, k), dtype=complex)
                e[i, j], e[j, i] = 1j, 1j
                basis.append(e)
    cols = [psi @ b for b in basis]
    mat = np.array([np.concatenate([c.real.ravel(), c.imag.ravel()]) for c in cols]).T
    rhs = np.concatenate([x.real.ravel(), x.imag.ravel()])
    coef, *_ = np.linalg.lstsq(mat, rhs, rcond=None)
    return sum(c * b for c, b in zip(coef, basis))


def cone_state(theta, phi):
    """Single-valued gauge of the Bloch-sphere state at polar angle theta."""
    return np.array([np.cos(theta / 2), np.exp(1j * phi) * np.sin(theta / 2)])


def berry_line_integral(state, points=20001):
    """Geometric phase of a closed loop phi -> state(phi), phi in [0, 2 pi].

    ``gamma = integral of i <psi | d psi / d phi> d phi`` with a central
    difference for the derivative and the trapezoid rule for the integral.
    """
    phis = np.linspace(0.0, 2 * np.pi, points)
    h = 1e-5
    integrand = np.array([
        np.real(1j * np.vdot(state(p), (state(p + h) - state(p - h)) / (2 * h))) for p in phis
    ])
    return float(trapezoid(integrand, phis))


def interferometric_phase(weights, branch_phases):
    """arg of the weighted sum of unit phasors of each eigen-branch."""
    return float(np.angle(np.sum(np.asarray(weights) * np.exp(1j * np.asarray(branch_phases)))))


def wrap(angle):
    return (angle + np.pi) % (2 * np.pi) - np.pi


def rodrigues(v, axis, angle):
    """Rotate ``v`` about ``axis``; ``angle`` may be an array of angles."""
    axis = axis / np.linalg.norm(axis)
    c = np.cos(angle)[..., None]
    s = np.sin(angle)[..., None]
    return v * c + np.cross(axis, v) * s + axis * np.dot(axis, v) * (1 - c)


def constant_h_scan(r0, r1, polar=181, azimuth=72, times=4001):
    """Smallest dispersion length over constant H = (1/2) n.sigma steering r0 to r1.

    Pure qubit states with Bloch vectors ``r0``, ``r1``.  Under
    ``H = (1/2) n.sigma`` the Bloch vector rotates about ``n`` at unit rate and
    the energy dispersion is ``(1/2) sqrt(1 - (n.r0)^2)``.  For each axis on the
    grid the earliest time the rotated vector meets ``r1`` (to 1e-6) is found by
    scanning one revolution and refining by ternary search.
    """
    best = np.inf
    ts = np.linspace(0.0, 2 * np.pi, times)
    for beta in np.linspace(0.0, np.pi, polar):
        for alpha in np.linspace(0.0, 2 * np.pi, azimuth, endpoint=False):
            n = np.array([np.sin(beta) * np.cos(alpha), np.sin(beta) * np.sin(alpha), np.cos(beta)])
            dist = np.linalg.norm(rodrigues(r0, n, ts) - r1, axis=-1)
            i = int(np.argmin(dist))
            if dist[i] > 1e-2:
                continue
            lo, hi = ts[max(i - 1, 0)], ts[min(i + 1, times - 1)]
            for _ in range(80):
                m1, m2 = lo + (hi - lo) / 3, hi - (hi - lo) / 3
                if np.linalg.norm(rodrigues(r0, n, m1) - r1) < np.linalg.norm(rodrigues(r0, n, m2) - r1):
                    hi = m2
                else:
                    lo = m1
            t = 0.5 * (lo + hi)
            if np.linalg.norm(rodrigues(r0, n, t) - r1) > 1e-6:
                continue
            spread = 0.5 * np.sqrt(max(0.0, 1 - np.dot(n, r0) ** 2))
            best = min(best, spread * t)
    return best


def bloch_vector(rho):
    sx = np.array([[0, 1], [1, 0]])
    sy = np.array([[0, -1j], [1j, 0]])
    sz = np.diag([1, -1])
    return np.real([np.trace(rho @ s) for s in (sx, sy, sz)])
