"""Text formats for correlator grids and Pauli sums.

Grid files::

    # format=dde-grid v1
    # T=<float>
    # dt=<float>
    # backend=<str>
    # seed=<int>
    # provenance=<json>
    i j Re(A) Im(A) Re(B) Im(B)
    ...

Every entry of the ``N_T x N_T`` grids is written with ``repr`` floats, so a
save/load round trip is bit-identical.  Pauli-sum files use the same header
style (``# format=dde-paulisum v1``, ``# n_qubits``, ``# constant``,
``# meta``) followed by ``coefficient STRING`` rows.
"""

from __future__ import annotations

import json
import os

import numpy as np

from .errors import ParseError, UnsupportedVersionError
from .grid import CorrelatorSet, TimeGrid
from .pauli import PauliString, PauliSum

__all__ = [
    "GRID_FORMAT",
    "PAULI_FORMAT",
    "dumps_grid",
    "loads_grid",
    "save_grid",
    "load_grid",
    "dumps_paulisum",
    "loads_paulisum",
    "save_paulisum",
    "load_paulisum",
]

GRID_FORMAT = "dde-grid"
PAULI_FORMAT = "dde-paulisum"
VERSION = "v1"


def _jsonable(x):
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.floating):
        return float(x)
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, (set, tuple)):
        return list(x)
    return str(x)


def _dump_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, default=_jsonable)


def _header(lines, kind):
    """Parse leading ``# key=value`` lines; return (fields, index of first data line)."""
    if not lines:
        raise ParseError("empty file", 1)
    first = lines[0].strip()
    if not first.startswith("# format="):
        raise ParseError("missing '# format=' header", 1)
    parts = first[len("# format="):].split()
    if len(parts) != 2 or parts[0] != kind:
        raise ParseError(f"expected format {kind}, got {first!r}", 1)
    if parts[1] != VERSION:
        raise UnsupportedVersionError(f"unsupported {kind} version {parts[1]!r}", 1)
    fields = {}
    k = 1
    while k < len(lines) and lines[k].startswith("#"):
        body = lines[k][1:].strip()
        if "=" not in body:
            raise ParseError(f"malformed header line {lines[k]!r}", k + 1)
        key, value = body.split("=", 1)
        fields[key.strip()] = (value.strip(), k + 1)
        k += 1
    return fields, k


def _require(fields, key, convert, last_line):
    if key not in fields:
        raise ParseError(f"missing header field {key!r}", last_line)
    value, line = fields[key]
    try:
        return convert(value)
    except (ValueError, json.JSONDecodeError) as exc:
        raise ParseError(f"bad value for {key!r}: {exc}", line) from exc


def dumps_grid(corr: CorrelatorSet) -> str:
    prov = dict(corr.provenance)
    out = [
        f"# format={GRID_FORMAT} {VERSION}",
        f"# T={corr.grid.T!r}",
        f"# dt={corr.grid.dt!r}",
        f"# backend={corr.backend}",
        f"# seed={int(prov.get('seed', 0))}",
        f"# provenance={_dump_json(prov)}",
    ]
    n = corr.grid.n_times
    A, B = corr.A, corr.B
    for i in range(n):
        for j in range(n):
            a, b = A[i, j], B[i, j]
            out.append(f"{i} {j} {float(a.real)!r} {float(a.imag)!r} "
                       f"{float(b.real)!r} {float(b.imag)!r}")
    return "\n".join(out) + "\n"


def loads_grid(text: str) -> CorrelatorSet:
    lines = text.splitlines()
    fields, start = _header(lines, GRID_FORMAT)
    T = _require(fields, "T", float, start)
    dt = _require(fields, "dt", float, start)
    _require(fields, "backend", str, start)
    _require(fields, "seed", int, start)
    prov = _require(fields, "provenance", json.loads, start) if "provenance" in fields else {}
    try:
        grid = TimeGrid(T, dt)
    except ValueError as exc:
        raise ParseError(f"invalid grid: {exc}", start) from exc
    n = grid.n_times
    A = np.empty((n, n), dtype=complex)
    B = np.empty((n, n), dtype=complex)
    seen = np.zeros((n, n), dtype=bool)
    rows = 0
    for k in range(start, len(lines)):
        line = lines[k].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 6:
            raise ParseError(f"expected 6 fields, got {len(parts)}", k + 1)
        try:
            i, j = int(parts[0]), int(parts[1])
            ar, ai, br, bi = (float(p) for p in parts[2:])
        except ValueError as exc:
            raise ParseError(str(exc), k + 1) from exc
        if not (0 <= i < n and 0 <= j < n):
            raise ParseError(f"index ({i}, {j}) outside a {n}x{n} grid", k + 1)
        if seen[i, j]:
            raise ParseError(f"duplicate entry ({i}, {j})", k + 1)
        seen[i, j] = True
        A[i, j] = complex(ar, ai)
        B[i, j] = complex(br, bi)
        rows += 1
    if rows != n * n:
        raise ParseError(f"expected {n * n} entries, found {rows} (truncated file?)",
                         len(lines) + 1)
    return CorrelatorSet(grid, A, B, prov)


def save_grid(corr: CorrelatorSet, path) -> None:
    """Write ``corr``; the file is replaced atomically."""
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="ascii") as fh:
        fh.write(dumps_grid(corr))
    os.replace(tmp, path)


def load_grid(path) -> CorrelatorSet:
    with open(path, encoding="ascii") as fh:
        return loads_grid(fh.read())


def dumps_paulisum(H: PauliSum) -> str:
    out = [
        f"# format={PAULI_FORMAT} {VERSION}",
        f"# n_qubits={H.n_qubits}",
        f"# constant={H.constant!r}",
        f"# meta={_dump_json(H.meta)}",
    ]
    out += [f"{c!r} {s.ops}" for c, s in H.terms]
    return "\n".join(out) + "\n"


def loads_paulisum(text: str) -> PauliSum:
    lines = text.splitlines()
    fields, start = _header(lines, PAULI_FORMAT)
    n = _require(fields, "n_qubits", int, start)
    constant = _require(fields, "constant", float, start)
    meta = _require(fields, "meta", json.loads, start) if "meta" in fields else {}
    terms = []
    for k in range(start, len(lines)):
        line = lines[k].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ParseError("expected 'coefficient STRING'", k + 1)
        try:
            coeff = float(parts[0])
            string = PauliString(parts[1])
        except ValueError as exc:
            raise ParseError(str(exc), k + 1) from exc
        if string.n_qubits != n:
            raise ParseError(f"string has {string.n_qubits} qubits, expected {n}", k + 1)
        terms.append((coeff, string))
    return PauliSum(n, terms, constant, meta)


def save_paulisum(H: PauliSum, path) -> None:
    with open(path, "w", encoding="ascii") as fh:
        fh.write(dumps_paulisum(H))


def load_paulisum(path) -> PauliSum:
    with open(path, encoding="ascii") as fh:
        return loads_paulisum(fh.read())
