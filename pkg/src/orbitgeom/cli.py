"""Command-line front end.

Exit codes: 0 success, 2 validation failure, 3 undefined phase,
4 optimizer stalled, 5 grid too coarse.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import io
from .core import BundlePoint, spectrum_of, validate_density
from .distance import DistanceConfig, bures_distance, dynamic_distance
from .dynamics import (
    holonomy_trace,
    horizontal_lift,
    phase_of,
    propagate_von_neumann,
    refinement_probe,
)
from .errors import GeometryError, GridTooCoarse, PhaseUndefined
from .geometry import GeometryContext
from .sampling import random_isospectral_pair

log = logging.getLogger("orbitgeom")

EXIT_OK, EXIT_INVALID, EXIT_PHASE, EXIT_STALLED, EXIT_COARSE = 0, 2, 3, 4, 5
BOUND_SLACK = 1e-6
ENSEMBLE_HEADER = ["index", "dynamic", "bures", "gap", "endpoint_residual", "bound_ok", "stalled", "error"]


class ConfigError(ValueError):
    pass


def _require(args, *names):
    missing = [n for n in names if getattr(args, n, None) is None]
    if missing:
        raise ConfigError("missing required option(s): " + ", ".join("--" + m.replace("_", "-") for m in missing))


def _check_common(args):
    if getattr(args, "steps", None) is not None and args.steps < 2:
        raise ConfigError(f"steps must be at least 2, got {args.steps}")
    if getattr(args, "t0", None) is not None and getattr(args, "t1", None) is not None and not args.t1 > args.t0:
        raise ConfigError(f"t1 must exceed t0, got t0={args.t0}, t1={args.t1}")
    if getattr(args, "hbar", None) is not None and not args.hbar > 0:
        raise ConfigError(f"hbar must be positive, got {args.hbar}")
    seed = getattr(args, "seed", None)
    if seed is not None and not 0 <= seed < 2 ** 64:
        raise ConfigError(f"seed must be a 64-bit unsigned integer, got {seed}")


def _write_record(record: dict, out, fmt: str):
    if fmt == "csv":
        flat = {k: v for k, v in record.items() if not isinstance(v, (dict, list))}
        text_rows = [list(flat), [io.fmt(v) if isinstance(v, float) else str(v) for v in flat.values()]]
        if out:
            with open(out, "w", newline="") as fh:
                csv.writer(fh, lineterminator="\n").writerows(text_rows)
        else:
            csv.writer(sys.stdout, lineterminator="\n").writerows(text_rows)
        return
    text = json.dumps(record, indent=2, sort_keys=True)
    if out:
        Path(out).write_text(text + "\n")
    else:
        print(text)


def _load_state(file):
    return validate_density(io.read_matrix(file))


def cmd_phase(args) -> int:
    _require(args, "H", "rho", "t0", "t1")
    path = io.read_hamiltonian(args.H)
    rho0 = _load_state(args.rho)
    psi0 = None
    if args.psi:
        psi0 = BundlePoint(io.read_matrix(args.psi), spectrum_of(rho0))
    ctx = GeometryContext(spectrum_of(rho0), hbar=args.hbar)
    traj = horizontal_lift(path, rho0, args.t0, args.t1, args.steps, ctx, psi0)
    tr = holonomy_trace(traj)
    record = {
        "holonomy_trace_abs": float(abs(tr)),
        "steps": int(args.steps),
        "residuals": {
            "horizontality_max": float(traj.residuals.max()),
            "fiber_max": traj.fiber_residual(),
        },
    }
    try:
        record["gamma_radians"] = phase_of(tr)
    except PhaseUndefined:
        record["gamma_radians"] = None
        _write_record(record, args.out, args.format)
        raise
    _write_record(record, args.out, args.format)
    return EXIT_OK


def _distance_config(args) -> DistanceConfig:
    return DistanceConfig(
        segments=args.segments,
        restarts=args.restarts,
        seed=args.seed,
        endpoint_tol=args.endpoint_tol,
        max_rounds=args.max_rounds,
        method=args.method,
        h_bound=args.h_bound,
    )


def cmd_distance(args) -> int:
    _require(args, "rho0", "rho1")
    rho0 = _load_state(args.rho0)
    rho1 = _load_state(args.rho1)
    start = time.perf_counter()
    result = dynamic_distance(rho0, rho1, _distance_config(args))
    wall = time.perf_counter() - start
    bures = bures_distance(rho0, rho1)
    record = {
        "inputs": {"rho0": str(args.rho0), "rho1": str(args.rho1), "seed": args.seed},
        "bures": bures,
        "bound_ok": bool(result.distance >= bures - BOUND_SLACK),
        "wall_time_s": wall,
        **result.as_dict(),
    }
    _write_record(record, args.out, args.format)
    if args.hamiltonian_out:
        io.write_hamiltonian(args.hamiltonian_out, result.hamiltonian)
    if result.stalled:
        log.error("optimizer stalled: endpoint residual %.3e above %g",
                  result.endpoint_residual, args.endpoint_tol)
        return EXIT_STALLED
    return EXIT_OK


def _ensemble_row(job):
    index, seed_seq, n, k, cfg_kwargs = job
    rng = np.random.default_rng(seed_seq)
    row = {"index": index, "dynamic": "", "bures": "", "gap": "", "endpoint_residual": "",
           "bound_ok": "", "stalled": "", "error": ""}
    try:
        rho0, rho1 = random_isospectral_pair(n, k, rng)
        cfg = DistanceConfig(seed=int(rng.integers(2 ** 32)), **cfg_kwargs)
        result = dynamic_distance(rho0, rho1, cfg)
        bures = bures_distance(rho0, rho1)
        row.update(
            dynamic=io.fmt(result.distance),
            bures=io.fmt(bures),
            gap=io.fmt(result.distance - bures),
            endpoint_residual=io.fmt(result.endpoint_residual),
            bound_ok=str(result.distance >= bures - BOUND_SLACK).lower(),
            stalled=str(result.stalled).lower(),
        )
    except (GeometryError, ArithmeticError, ValueError) as exc:
        row["error"] = f"{type(exc).__name__}: {exc}".replace("\n", " ")
    return [str(row[h]) for h in ENSEMBLE_HEADER]


def cmd_ensemble(args) -> int:
    if args.count < 0:
        raise ConfigError(f"count must be non-negative, got {args.count}")
    if not 1 <= args.k <= args.n:
        raise ConfigError(f"need 1 <= k <= n, got n={args.n}, k={args.k}")
    children = np.random.SeedSequence(args.seed).spawn(args.count)
    cfg_kwargs = dict(segments=args.segments, restarts=args.restarts, endpoint_tol=args.endpoint_tol,
                      max_rounds=args.max_rounds, method=args.method, h_bound=args.h_bound)
    jobs = [(i, children[i], args.n, args.k, cfg_kwargs) for i in range(args.count)]
    workers = args.workers or os.cpu_count() or 1
    if workers == 1 or len(jobs) <= 1:
        rows = [_ensemble_row(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_ensemble_row, jobs))
    out = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        w = csv.writer(out, lineterminator="\n")
        w.writerow(ENSEMBLE_HEADER)
        w.writerows(rows)
    finally:
        if args.out:
            out.close()
    failed = sum(1 for r in rows if r[-1])
    if failed:
        log.warning("%d of %d rows failed", failed, len(rows))
    return EXIT_OK


def cmd_lift(args) -> int:
    _require(args, "H", "rho", "t0", "t1")
    path = io.read_hamiltonian(args.H)
    rho0 = _load_state(args.rho)
    ctx = GeometryContext(spectrum_of(rho0), hbar=args.hbar)
    traj = horizontal_lift(path, rho0, args.t0, args.t1, args.steps, ctx)
    rhos = propagate_von_neumann(path, rho0, traj.grid)
    summary = {
        "steps": traj.steps,
        "max_residual": float(traj.residuals.max()),
        "fiber_residual": traj.fiber_residual(),
    }
    if args.probe:
        rc, rf, ratio = refinement_probe(path, rho0, args.t0, args.t1, args.steps, ctx)
        summary["probe"] = {"coarse": rc, "fine": rf, "ratio": None if np.isnan(ratio) else ratio}
    io.write_trajectory_csv(args.out or sys.stdout, traj.grid, rhos,
                            None if args.no_gauge else traj.gauge_factors, traj.residuals)
    if args.summary:
        Path(args.summary).write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return EXIT_OK


def _bloch_state(theta: float, phi: float = 0.0, radius: float = 1.0) -> np.ndarray:
    r = radius * np.array([np.sin(theta) * np.cos(phi), np.sin(theta) * np.sin(phi), np.cos(theta)])
    sx = np.array([[0, 1], [1, 0]], dtype=complex)
    sy = np.array([[0, -1j], [1j, 0]])
    sz = np.diag([1.0, -1.0]).astype(complex)
    return 0.5 * (np.eye(2) + r[0] * sx + r[1] * sy + r[2] * sz)


def cmd_scenario(args) -> int:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    meta = {"scenario": args.name}
    if args.name == "precession":
        io.write_matrix(out / "H.json", 0.5 * args.omega * np.diag([1.0, -1.0]))
        io.write_matrix(out / "rho.json", _bloch_state(args.theta, radius=args.radius))
        meta.update(theta=args.theta, omega=args.omega, radius=args.radius, t0=0.0, t1=2 * np.pi / args.omega,
                    expected_pure_phase=-np.pi * (1 - np.cos(args.theta)))
    elif args.name == "rabi":
        io.write_matrix(out / "H.json", 0.5 * args.omega * np.array([[0, 1], [1, 0]]))
        io.write_matrix(out / "rho.json", np.diag([1.0, 0.0]))
        meta.update(omega=args.omega, t0=0.0, t1=np.pi / args.omega)
    elif args.name == "stationary":
        io.write_matrix(out / "H.json", np.diag([1.0, -0.5, 0.25]))
        io.write_matrix(out / "rho.json", np.diag([0.5, 0.3, 0.2]))
        meta.update(t0=0.0, t1=1.0)
    elif args.name == "pair":
        rng = np.random.default_rng(args.seed)
        rho0, rho1 = random_isospectral_pair(args.n, args.k, rng)
        io.write_matrix(out / "rho0.json", rho0)
        io.write_matrix(out / "rho1.json", rho1)
        meta.update(n=args.n, k=args.k, seed=args.seed)
    elif args.name == "orthogonal":
        io.write_matrix(out / "rho0.json", np.diag([1.0, 0.0]))
        io.write_matrix(out / "rho1.json", np.diag([0.0, 1.0]))
    (out / "scenario.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return EXIT_OK


def _add_common(p):
    p.add_argument("--config", help="JSON file of option defaults; explicit flags override it")
    p.add_argument("--out", help="output file (default: stdout)")
    p.add_argument("--format", choices=["json", "csv"], default="json")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--hbar", type=float, default=0.5)
    p.add_argument("-v", "--verbose", action="store_true")


def _add_evolution(p):
    p.add_argument("--H", help="Hamiltonian matrix file")
    p.add_argument("--rho", help="initial density matrix file")
    p.add_argument("--t0", type=float, default=0.0)
    p.add_argument("--t1", type=float)
    p.add_argument("--steps", type=int, default=1000)


def _add_optimizer(p):
    p.add_argument("--segments", type=int, default=8)
    p.add_argument("--restarts", type=int, default=4)
    p.add_argument("--endpoint-tol", type=float, default=1e-6)
    p.add_argument("--max-rounds", type=int, default=6)
    p.add_argument("--method", choices=["auto", "simplex", "gradient"], default="auto")
    p.add_argument("--h-bound", type=float, default=50.0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="orbitgeom", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("phase", help="operational geometric phase of a driven state")
    _add_common(p)
    _add_evolution(p)
    p.add_argument("--psi", help="initial bundle point file (default: standard purification)")
    p.set_defaults(func=cmd_phase)

    p = sub.add_parser("distance", help="dynamic distance upper bound and Bures distance")
    _add_common(p)
    _add_optimizer(p)
    p.add_argument("--rho0")
    p.add_argument("--rho1")
    p.add_argument("--hamiltonian-out", help="write the optimal Hamiltonian path here")
    p.set_defaults(func=cmd_distance)

    p = sub.add_parser("ensemble", help="dynamic vs Bures distance on random isospectral pairs")
    _add_common(p)
    _add_optimizer(p)
    p.add_argument("--n", type=int, default=2)
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--count", type=int, default=10)
    p.add_argument("--workers", type=int, default=0, help="worker processes (0: number of processors)")
    p.set_defaults(func=cmd_ensemble)

    p = sub.add_parser("lift", help="dump a horizontal lift as CSV")
    _add_common(p)
    _add_evolution(p)
    p.add_argument("--no-gauge", action="store_true", help="omit the gauge factor columns")
    p.add_argument("--no-probe", dest="probe", action="store_false", help="skip the refinement probe")
    p.add_argument("--summary", help="write residual summary JSON here")
    p.set_defaults(func=cmd_lift)

    p = sub.add_parser("scenario", help="write canonical input files")
    p.add_argument("name", choices=["precession", "rabi", "stationary", "pair", "orthogonal"])
    p.add_argument("--out-dir", default=".")
    p.add_argument("--config")
    p.add_argument("--theta", type=float, default=np.pi / 3)
    p.add_argument("--omega", type=float, default=1.0)
    p.add_argument("--radius", type=float, default=1.0, help="Bloch radius (1 for a pure state)")
    p.add_argument("--n", type=int, default=2)
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-v", "--verbose", action="store_true")
    p.set_defaults(func=cmd_scenario)
    return parser


def _config_defaults(argv) -> dict:
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if not known.config:
        return {}
    obj = json.loads(Path(known.config).read_text())
    if not isinstance(obj, dict):
        raise ConfigError("config file must hold a JSON object")
    return {k.replace("-", "_"): v for k, v in obj.items()}


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        defaults = _config_defaults(argv)
    except (OSError, ValueError) as exc:
        print(f"error: config: {exc}", file=sys.stderr)
        return EXIT_INVALID
    if defaults:
        for action in parser._subparsers._group_actions:
            for sp in action.choices.values():
                sp.set_defaults(**defaults)
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        _check_common(args)
        return args.func(args)
    except GeometryError as exc:
        print(f"error: {type(exc).__name__}: invariant '{exc.invariant}' violated: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except PhaseUndefined as exc:
        print(f"error: phase undefined: {exc}", file=sys.stderr)
        return EXIT_PHASE
    except GridTooCoarse as exc:
        print(f"error: grid too coarse: {exc}", file=sys.stderr)
        return EXIT_COARSE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
