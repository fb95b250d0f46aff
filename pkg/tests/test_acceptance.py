"""Acceptance suite: one verdict line per criterion, at the stated tolerances.

Each test prints ``CRITERION <n> PASS|FAIL: ...`` and fails if any clause of
the criterion fails.  The lines are repeated in the pytest terminal summary.
"""

import numpy as np
import pytest

from orbitgeom.cli import main
from orbitgeom.core import BundlePoint, dagger, spectrum_of, standard_purification
from orbitgeom.distance import (
    bures_distance,
    curve_length_in_base,
    dispersion_length,
    dynamic_distance,
)
from orbitgeom.dynamics import (
    HamiltonianPath,
    horizontal_lift,
    operational_geometric_phase,
    propagate_von_neumann,
    refinement_probe,
    time_grid,
)
from orbitgeom.geometry import (
    GeometryContext,
    connection_form,
    horizontal_projection,
    metric_G,
    moment_of_inertia,
    vertical_projection,
)
from orbitgeom.sampling import (
    random_density,
    random_gauge_element,
    random_gauge_unitary,
    random_hermitian,
    random_isospectral_pair,
)

from conftest import random_point, random_tangent
from oracles import berry_line_integral, cone_state, constant_h_scan, interferometric_phase, wrap
from test_distance import horizontal_path

VERDICTS = []

SX = np.array([[0, 1], [1, 0]], dtype=complex)
SZ = np.diag([1.0 + 0j, -1.0])


def verdict(number, clauses):
    """``clauses``: list of (description, ok).  Prints and asserts."""
    ok = all(c[1] for c in clauses)
    detail = "; ".join(f"{d} [{'ok' if c else 'FAIL'}]" for d, c in clauses)
    line = f"CRITERION {number} {'PASS' if ok else 'FAIL'}: {detail}"
    VERDICTS.append(line)
    print(line)
    assert ok, line


def cone_rho(theta):
    v = cone_state(theta, 0.0)
    return np.outer(v, v.conj())


def test_criterion_1_connection_axioms():
    rng = np.random.default_rng(101)
    gen = equi = split = 0.0
    degenerate_draws = 0
    for i in range(1000):
        n = int(rng.integers(1, 7))
        k = int(rng.integers(1, n + 1))
        p = random_point(rng, n, k, degenerate=bool(i % 2))
        degenerate_draws += any(m > 1 for m in p.spectrum.multiplicities)
        ctx = GeometryContext(p.spectrum)
        x = random_tangent(rng, p)
        xi = random_gauge_element(p.spectrum, rng)
        u = random_gauge_unitary(p.spectrum, rng)
        gen = max(gen, np.linalg.norm(connection_form(ctx, p, p.matrix @ xi) - xi))
        lhs = connection_form(ctx, p.matrix @ u, x @ u)
        equi = max(equi, np.linalg.norm(lhs - dagger(u) @ connection_form(ctx, p, x) @ u))
        split = max(split, abs(metric_G(ctx, vertical_projection(ctx, p, x), horizontal_projection(ctx, p, x))))
    verdict(1, [
        (f"generator reproduction max {gen:.2e} <= 1e-12", gen <= 1e-12),
        (f"gauge equivariance max {equi:.2e} <= 1e-12", equi <= 1e-12),
        (f"orthogonal splitting max {split:.2e} <= 1e-12", split <= 1e-12),
        (f"1000 draws, {degenerate_draws} with degenerate spectra", degenerate_draws > 100),
    ])


def test_criterion_2_inertia_identity():
    rng = np.random.default_rng(202)
    worst = 0.0
    for i in range(200):
        n = int(rng.integers(1, 7))
        k = int(rng.integers(1, n + 1))
        p = random_point(rng, n, k, degenerate=bool(i % 2))
        ctx = GeometryContext(p.spectrum, hbar=[0.5, 1.0, 2.5][i % 3])
        xi, eta = random_gauge_element(p.spectrum, rng), random_gauge_element(p.spectrum, rng)
        ref = moment_of_inertia(ctx, xi, eta)
        for _ in range(3):
            q = p.matrix @ random_gauge_unitary(p.spectrum, rng)
            worst = max(worst, abs(ref - metric_G(ctx, q @ xi, q @ eta)))
    verdict(2, [(f"max |I - G(psi xi, psi eta)| over 200 draws x 3 fiber points = {worst:.2e} <= 1e-12",
                 worst <= 1e-12)])


def test_criterion_3_horizontal_lift():
    theta = np.pi / 3
    path = HamiltonianPath.constant(0.5 * SZ)
    rho0 = cone_rho(theta)
    traj = horizontal_lift(path, rho0, 0, 2 * np.pi, 10_000)
    res = float(traj.residuals.max())
    fiber = traj.fiber_residual()
    coarse, fine, ratio = refinement_probe(path, rho0, 0, 2 * np.pi, 10_000)
    verdict(3, [
        (f"residual at 1e4 steps {res:.2e} <= 1e-6", res <= 1e-6),
        (f"refinement ratio {fine:.3e}/{coarse:.3e} = {ratio:.3f} in [0.4, 0.6]", 0.4 <= ratio <= 0.6),
        (f"fiber residual {fiber:.2e} <= 1e-10", fiber <= 1e-10),
    ])


def test_criterion_4_geometric_phase():
    theta = np.pi / 3
    path = HamiltonianPath.constant(0.5 * SZ)
    oracle = berry_line_integral(lambda phi: cone_state(theta, phi))
    gamma = operational_geometric_phase(path, cone_rho(theta), 0, 2 * np.pi, 100_000)
    err_a = abs(wrap(gamma - oracle))

    err_b = 0.0
    for p in (0.95, 0.8, 0.65, 0.55):
        up, down = cone_state(theta, 0.0), cone_state(np.pi - theta, np.pi)
        rho = p * np.outer(up, up.conj()) + (1 - p) * np.outer(down, down.conj())
        branches = [berry_line_integral(lambda phi: cone_state(theta, phi)),
                    berry_line_integral(lambda phi: cone_state(np.pi - theta, phi + np.pi))]
        mixed = operational_geometric_phase(path, rho, 0, 2 * np.pi, 2000)
        err_b = max(err_b, abs(wrap(mixed - interferometric_phase([p, 1 - p], branches))))

    rng = np.random.default_rng(404)
    err_c = 0.0
    for i in range(100):
        n = int(rng.integers(2, 5))
        rho0 = random_density(n, int(rng.integers(1, n + 1)), rng, degenerate=bool(i % 2))
        times = np.sort(np.concatenate([[0.0, 1.0], rng.uniform(0, 1, 2)]))
        h = HamiltonianPath.sampled(times, [random_hermitian(n, rng) for _ in range(3)])
        psi0 = standard_purification(rho0)
        u = random_gauge_unitary(psi0.spectrum, rng)
        a = operational_geometric_phase(h, rho0, 0, 1, 200, psi0=psi0)
        b = operational_geometric_phase(h, rho0, 0, 1, 200, psi0=BundlePoint(psi0.matrix @ u, psi0.spectrum))
        err_c = max(err_c, abs(wrap(a - b)))

    verdict(4, [
        (f"(a) pure loop gamma {gamma:.10f} vs line integral {oracle:.10f}, "
         f"closed form {-np.pi * (1 - np.cos(theta)):.10f}: error {err_a:.2e} <= 1e-3", err_a <= 1e-3),
        (f"(b) mixed qubit vs interferometric oracle max error {err_b:.2e} <= 1e-8", err_b <= 1e-8),
        (f"(c) gauge invariance over 100 draws max {err_c:.2e} <= 1e-10", err_c <= 1e-10),
    ])


def test_criterion_5_dispersion():
    rng = np.random.default_rng(505)
    h = random_hermitian(3, rng)
    rho0 = random_density(3, 3, rng)
    rep = dispersion_length(HamiltonianPath.constant(h), rho0, 0, 2, 1000)
    spread = float(np.ptp(rep.integrand))

    shift = 0.0
    for _ in range(10):
        times = np.sort(np.concatenate([[0.0, 1.0], rng.uniform(0, 1, 3)]))
        path = HamiltonianPath.sampled(times, [random_hermitian(3, rng) for _ in range(4)])
        r = random_density(3, int(rng.integers(1, 4)), rng)
        c = rng.normal() * 10
        a = dispersion_length(path, r, 0, 1, 200).value
        b = dispersion_length(path.map(lambda m: m + c * np.eye(3)), r, 0, 1, 200).value
        shift = max(shift, abs(a - b))

    # Equality of the two lengths holds when the generator moves the state
    # horizontally: always for pure states, and for mixed states when the
    # generator has no diagonal part in the current eigenbasis.
    scale_err = 0.0
    for i in range(50):
        hbar = (0.5, 1.0)[i % 2]
        if i < 25:
            r = random_density(3, 1, rng)
            times = np.sort(np.concatenate([[0.0, 1.0], rng.uniform(0, 1, 3)]))
            path = HamiltonianPath.sampled(times, [random_hermitian(3, rng) for _ in range(4)])
        else:
            r = random_density(3, 3, rng)
            path = horizontal_path(rng, r, 4)
        ctx = GeometryContext(spectrum_of(r), hbar=hbar)
        traj = horizontal_lift(path, r, 0, 1, 2000, ctx)
        d = dispersion_length(path, r, 0, 1, 2000).value
        scale_err = max(scale_err, abs(d - curve_length_in_base(traj, ctx) / np.sqrt(2 * hbar)))

    # generic mixed generators: the base-curve length is strictly shorter
    gaps = []
    for _ in range(10):
        r = random_density(3, 3, rng)
        path = HamiltonianPath.constant(random_hermitian(3, rng))
        traj = horizontal_lift(path, r, 0, 1, 500)
        gaps.append(dispersion_length(path, r, 0, 1, 500).value - curve_length_in_base(traj, GeometryContext(traj.spectrum)))
    print(f"note: generic mixed generators give dispersion - curve length in [{min(gaps):.3f}, {max(gaps):.3f}]")

    verdict(5, [
        (f"constant-H integrand spread {spread:.2e} <= 1e-12", spread <= 1e-12),
        (f"H + cI invariance max {shift:.2e} <= 1e-12", shift <= 1e-12),
        (f"dispersion vs curve length / sqrt(2 hbar) on 50 paths "
         f"(25 pure, 25 mixed horizontal) max {scale_err:.2e} <= 1e-6", scale_err <= 1e-6),
    ])


@pytest.mark.slow
def test_criterion_6_dynamic_distance():
    up, down = np.diag([1.0, 0.0]), np.diag([0.0, 1.0])
    oracle = constant_h_scan(np.array([0, 0, 1.0]), np.array([0, 0, -1.0]), polar=73, azimuth=24, times=1441)
    res = dynamic_distance(up, down)
    traj = horizontal_lift(res.hamiltonian, up, 0, 1, 4000)
    lift_len = curve_length_in_base(traj, GeometryContext(traj.spectrum))

    rho = random_density(3, 2, np.random.default_rng(6))
    same = dynamic_distance(rho, rho).distance

    rng = np.random.default_rng(42)
    ok = 0
    gaps = []
    stalled = 0
    for i in range(100):
        a, b = random_isospectral_pair(2, 1 + i % 2, rng)
        r = dynamic_distance(a, b)
        stalled += r.stalled
        bures = bures_distance(a, b)
        ok += r.distance >= bures - 1e-6
        gaps.append(r.distance - bures)
    verdict(6, [
        (f"orthogonal pair {res.distance:.6f} vs scan oracle {oracle:.6f} (lift length {lift_len:.6f}), "
         f"|diff| <= 1e-2", abs(res.distance - oracle) <= 1e-2 and abs(lift_len - res.distance) <= 1e-2),
        (f"Dist(rho, rho) = {same!r}", same == 0.0),
        (f"lower bound holds in {ok}/100 pairs ({stalled} stalled)", ok == 100 and stalled == 0),
        (f"largest gap {max(gaps):.4f} > 0.05", max(gaps) > 0.05),
    ])


def test_criterion_7_propagation_integrity():
    rng = np.random.default_rng(707)
    spec_drift = trace_drift = 0.0
    for _ in range(5):
        times = np.sort(np.concatenate([[0.0, 5.0], rng.uniform(0, 5, 39)]))
        path = HamiltonianPath.sampled(times, [random_hermitian(4, rng, scale=2.0) for _ in range(40)])
        rho0 = random_density(4, int(rng.integers(1, 5)), rng)
        rhos = propagate_von_neumann(path, rho0, time_grid(0, 5, 10_000, path))
        ref = np.linalg.eigvalsh(rho0)
        spec_drift = max(spec_drift, float(np.abs(np.linalg.eigvalsh(rhos) - ref).max()))
        trace_drift = max(trace_drift, float(np.abs(np.trace(rhos, axis1=1, axis2=2) - 1).max()))
    verdict(7, [
        (f"spectrum drift {spec_drift:.2e} <= 1e-10", spec_drift <= 1e-10),
        (f"trace drift {trace_drift:.2e} <= 1e-12", trace_drift <= 1e-12),
    ])


@pytest.mark.slow
def test_criterion_8_cli_determinism(tmp_path):
    outs = {}
    for name, workers in (("run1", 1), ("run2", 1), ("pool4", 4)):
        out = tmp_path / f"{name}.csv"
        code = main(["ensemble", "--n", "2", "--k", "2", "--count", "8", "--seed", "42",
                     "--workers", str(workers), "--out", str(out)])
        assert code == 0
        outs[name] = out.read_bytes()
    rows = outs["run1"].decode().count("\n") - 1
    verdict(8, [
        (f"two runs byte-identical ({rows} rows)", outs["run1"] == outs["run2"] and rows == 8),
        ("workers 1 vs 4 byte-identical", outs["run1"] == outs["pool4"]),
    ])
