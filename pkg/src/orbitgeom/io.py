"""Matrix files and tabular dumps.

A matrix file is a JSON object ``{"rows", "cols", "re", "im"}`` with row-major
real and imaginary parts.  Numbers are written with 17 significant digits and
integers are read back as floats, so every written matrix re-parses to the
identical bits.  A piecewise-constant Hamiltonian is stored as
``{"times": [...], "matrices": [<matrix>, ...]}``.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .dynamics import HamiltonianPath
from .errors import ShapeMismatch


def fmt(x: float) -> str:
    x = float(x)
    if not np.isfinite(x):
        return repr(x)
    return format(x, ".17g")


def _numbers(values) -> str:
    return "[" + ", ".join(fmt(v) for v in values) + "]"


def matrix_json(m) -> str:
    m = np.atleast_2d(np.asarray(m, dtype=complex))
    if m.ndim != 2:
        raise ShapeMismatch(f"expected a matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix has non-finite entries")
    rows, cols = m.shape
    flat = m.ravel()
    return (
        f'{{"rows": {rows}, "cols": {cols}, '
        f'"re": {_numbers(flat.real)}, "im": {_numbers(flat.imag)}}}'
    )


def matrix_from_obj(obj) -> np.ndarray:
    try:
        rows, cols = int(obj["rows"]), int(obj["cols"])
        re = np.asarray(obj["re"], dtype=float)
        im = np.asarray(obj["im"], dtype=float)
    except (KeyError, TypeError) as exc:
        raise ShapeMismatch(f"malformed matrix object: {exc}") from exc
    if re.size != rows * cols or im.size != rows * cols:
        raise ShapeMismatch(f"expected {rows * cols} entries, got {re.size} and {im.size}")
    out = np.empty(rows * cols, dtype=complex)
    # assign parts separately so that signed zeros survive
    out.real, out.imag = re, im
    return out.reshape(rows, cols)


def loads(text: str):
    return json.loads(text, parse_int=float)


def write_matrix(path, m) -> None:
    Path(path).write_text(matrix_json(m) + "\n")


def read_matrix(path) -> np.ndarray:
    return matrix_from_obj(loads(Path(path).read_text()))


def hamiltonian_json(path: HamiltonianPath) -> str:
    if path.is_constant:
        return matrix_json(path.matrices[0])
    mats = ", ".join(matrix_json(m) for m in path.matrices)
    return f'{{"times": {_numbers(path.times)}, "matrices": [{mats}]}}'


def write_hamiltonian(file, path: HamiltonianPath) -> None:
    Path(file).write_text(hamiltonian_json(path) + "\n")


def read_hamiltonian(file) -> HamiltonianPath:
    obj = loads(Path(file).read_text())
    if "matrices" in obj:
        return HamiltonianPath.sampled(obj["times"], [matrix_from_obj(m) for m in obj["matrices"]])
    return HamiltonianPath.constant(matrix_from_obj(obj))


def _flat_columns(prefix: str, rows: int, cols: int) -> list:
    out = []
    for i in range(rows):
        for j in range(cols):
            out += [f"{prefix}_{i}{j}_re", f"{prefix}_{i}{j}_im"]
    return out


def _flat_values(m: np.ndarray) -> list:
    out = []
    for z in np.asarray(m).ravel():
        out += [fmt(z.real), fmt(z.imag)]
    return out


def write_trajectory_csv(file, grid, rhos, gauge=None, residuals=None) -> None:
    """Columns ``t``, flattened ``rho`` (re/im interleaved), optional ``V``, ``residual``.

    ``residual`` on row ``i`` belongs to the interval starting at ``t_i``; the
    last row leaves it empty.
    """
    n = rhos.shape[1]
    header = ["t"] + _flat_columns("rho", n, n)
    if gauge is not None:
        header += _flat_columns("V", gauge.shape[1], gauge.shape[2])
    header.append("residual")
    fh = file if hasattr(file, "write") else open(file, "w", newline="")
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for i, t in enumerate(grid):
            row = [fmt(t)] + _flat_values(rhos[i])
            if gauge is not None:
                row += _flat_values(gauge[i])
            row.append(fmt(residuals[i]) if residuals is not None and i < len(residuals) else "")
            w.writerow(row)
    finally:
        if fh is not file:
            fh.close()
