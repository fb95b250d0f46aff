"""Seeded random draws used by tests and the ensemble command."""

from __future__ import annotations

import numpy as np
from scipy.stats import unitary_group

from .core import Spectrum, dagger


def haar_unitary(n: int, rng: np.random.Generator) -> np.ndarray:
    return unitary_group.rvs(n, random_state=rng) if n > 1 else np.exp(2j * np.pi * rng.random((1, 1)))


def random_spectrum_values(rank: int, rng: np.random.Generator, degenerate: bool = False) -> np.ndarray:
    """Decreasing positive weights summing to one; ``degenerate`` repeats some."""
    if degenerate and rank > 1:
        sizes = []
        left = rank
        while left:
            s = int(rng.integers(1, left + 1))
            sizes.append(s)
            left -= s
        w = rng.dirichlet(np.ones(len(sizes))) + 0.05
        vals = np.repeat(w / sizes, sizes)
    else:
        vals = rng.dirichlet(np.ones(rank)) + 0.02
    vals = vals / vals.sum()
    return np.sort(vals)[::-1]


def random_density(n: int, rank: int, rng: np.random.Generator, degenerate: bool = False) -> np.ndarray:
    """``U diag(p, 0) U^†`` with Haar ``U``."""
    p = np.zeros(n)
    p[:rank] = random_spectrum_values(rank, rng, degenerate)
    u = haar_unitary(n, rng)
    rho = (u * p[None, :]) @ dagger(u)
    return 0.5 * (rho + dagger(rho))


def random_gauge_element(spectrum: Spectrum, rng: np.random.Generator) -> np.ndarray:
    k = spectrum.rank
    a = rng.normal(size=(k, k)) + 1j * rng.normal(size=(k, k))
    xi = 0.5 * (a - dagger(a))
    return np.where(spectrum.block_mask, xi, 0)


def random_gauge_unitary(spectrum: Spectrum, rng: np.random.Generator) -> np.ndarray:
    k = spectrum.rank
    u = np.zeros((k, k), dtype=complex)
    for s in spectrum.blocks:
        u[s, s] = haar_unitary(s.stop - s.start, rng)
    return u


def random_hermitian(n: int, rng: np.random.Generator, scale: float = 1.0) -> np.ndarray:
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return scale * 0.5 * (a + dagger(a))


def random_isospectral_pair(n: int, rank: int, rng: np.random.Generator):
    rho0 = random_density(n, rank, rng)
    w = haar_unitary(n, rng)
    rho1 = w @ rho0 @ dagger(w)
    return rho0, 0.5 * (rho1 + dagger(rho1))
