"""Matrix file formats and synthetic planted-community instances.

Readers cover MatrixMarket (coordinate and array, real, general and
symmetric storage) and headerless CSV of floats; the writer emits dense
MatrixMarket array files with 17 significant digits so every double
round-trips bitwise.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .blocks import Array, ParameterError


class ParseError(ValueError):
    """Malformed input file; carries the path and 1-based line number."""

    def __init__(self, path, line: int, message: str):
        self.path = str(path)
        self.line = line
        super().__init__(f"{path}:{line}: {message}")


class ShapeError(ValueError):
    """Input matrix has the wrong shape for the requested operation."""


def read_matrix(path, require_square: bool = True) -> Array:
    """Load a matrix from a MatrixMarket or headerless CSV file.

    MatrixMarket symmetric storage is expanded to the full matrix.  With
    ``require_square`` (the default, suitable for solve input) non-square
    data raises ShapeError.
    """
    with open(path, "r") as fh:
        lines = fh.read().splitlines()
    if lines and lines[0].lstrip().startswith("%%MatrixMarket"):
        matrix = _read_matrix_market(lines, path)
    else:
        matrix = _read_csv(lines, path)
    if require_square and matrix.shape[0] != matrix.shape[1]:
        raise ShapeError(f"{path}: expected a square matrix, got {matrix.shape}")
    return matrix


def _read_matrix_market(lines: list[str], path) -> Array:
    header = lines[0].split()
    if len(header) != 5 or header[0] != "%%MatrixMarket" or header[1].lower() != "matrix":
        raise ParseError(path, 1, f"bad MatrixMarket header: {lines[0]!r}")
    fmt, field, symmetry = (tok.lower() for tok in header[2:5])
    if fmt not in ("coordinate", "array"):
        raise ParseError(path, 1, f"unsupported format {fmt!r}")
    if field not in ("real", "double", "integer"):
        raise ParseError(path, 1, f"unsupported field {field!r}")
    if symmetry not in ("general", "symmetric"):
        raise ParseError(path, 1, f"unsupported symmetry {symmetry!r}")

    # (line_number, tokens) for every non-comment, non-blank line after the header
    body = [
        (no, line.split())
        for no, line in enumerate(lines[1:], start=2)
        if line.strip() and not line.lstrip().startswith("%")
    ]
    if not body:
        raise ParseError(path, len(lines) or 1, "missing size line")
    size_no, size_tok = body[0]
    entries = body[1:]

    def parse_int(tok: str, no: int, what: str) -> int:
        try:
            return int(tok)
        except ValueError:
            raise ParseError(path, no, f"bad {what}: {tok!r}") from None

    def parse_float(tok: str, no: int) -> float:
        try:
            return float(tok)
        except ValueError:
            raise ParseError(path, no, f"bad value: {tok!r}") from None

    if fmt == "coordinate":
        if len(size_tok) != 3:
            raise ParseError(path, size_no, "coordinate size line must be 'rows cols nnz'")
        rows, cols, nnz = (parse_int(t, size_no, "size") for t in size_tok)
        if len(entries) != nnz:
            raise ParseError(
                path, size_no, f"expected {nnz} entries, found {len(entries)}"
            )
        matrix = np.zeros((rows, cols))
        for no, tok in entries:
            if len(tok) != 3:
                raise ParseError(path, no, "coordinate entry must be 'i j value'")
            i = parse_int(tok[0], no, "row index")
            j = parse_int(tok[1], no, "column index")
            if not (1 <= i <= rows and 1 <= j <= cols):
                raise ParseError(path, no, f"index ({i}, {j}) out of range")
            v = parse_float(tok[2], no)
            matrix[i - 1, j - 1] = v
            if symmetry == "symmetric" and i != j:
                matrix[j - 1, i - 1] = v
        return matrix

    if len(size_tok) != 2:
        raise ParseError(path, size_no, "array size line must be 'rows cols'")
    rows, cols = (parse_int(t, size_no, "size") for t in size_tok)
    values = [(no, t) for no, tok in entries for t in tok]
    if symmetry == "symmetric":
        if rows != cols:
            raise ParseError(path, size_no, "symmetric storage requires a square matrix")
        slots = [(i, j) for j in range(cols) for i in range(j, rows)]
    else:
        slots = [(i, j) for j in range(cols) for i in range(rows)]
    if len(values) != len(slots):
        raise ParseError(
            path,
            entries[-1][0] if entries else size_no,
            f"expected {len(slots)} values, found {len(values)}",
        )
    matrix = np.zeros((rows, cols))
    for (i, j), (no, tok) in zip(slots, values):
        v = parse_float(tok, no)
        matrix[i, j] = v
        if symmetry == "symmetric":
            matrix[j, i] = v
    return matrix


def _read_csv(lines: list[str], path) -> Array:
    rows: list[list[float]] = []
    width = None
    for no, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        cells = line.split(",")
        try:
            row = [float(c) for c in cells]
        except ValueError as exc:
            raise ParseError(path, no, f"not a number: {exc}") from None
        if width is None:
            width = len(row)
        elif len(row) != width:
            raise ParseError(path, no, f"expected {width} columns, found {len(row)}")
        rows.append(row)
    if not rows:
        raise ParseError(path, 1, "no data found")
    return np.array(rows)


def write_matrix_market(path, matrix: Array, comment: str | None = None) -> None:
    """Write a dense MatrixMarket array file (real, general storage)."""
    matrix = np.asarray(matrix, dtype=float)
    if matrix.ndim != 2:
        raise ShapeError(f"can only write matrices, got shape {matrix.shape}")
    rows, cols = matrix.shape
    with open(path, "w") as fh:
        fh.write("%%MatrixMarket matrix array real general\n")
        if comment:
            for part in comment.splitlines():
                fh.write(f"% {part}\n")
        fh.write(f"{rows} {cols}\n")
        for j in range(cols):
            for i in range(rows):
                fh.write(f"{matrix[i, j]:.17g}\n")


def write_labels(path, labels: Sequence[int]) -> None:
    """One integer label per line (-1 marks an unassigned row)."""
    with open(path, "w") as fh:
        for label in labels:
            fh.write(f"{int(label)}\n")


def read_labels(path) -> Array:
    with open(path, "r") as fh:
        return np.array([int(line) for line in fh if line.strip()], dtype=int)


def _grid_uniform(rng: np.random.Generator, shape, lo: float, hi: float) -> Array:
    # values on the dyadic grid lo + (hi - lo) * k/64 so that small products
    # of entries stay exactly representable in double precision
    return lo + (hi - lo) * rng.integers(0, 64, size=shape) / 64.0


def synth_instance(
    m: int,
    r: int,
    noise_level: float = 0.0,
    density: float = 1.0,
    seed: int = 0,
) -> tuple[Array, Array, Array]:
    """Planted-community instance (X, U*, V*) with X = U* V* U*^T + noise.

    Row j of U* belongs to community j mod r: its dominant entry is drawn
    from [1, 2) and off-community entries from [0, 0.25), each present with
    probability ``density``.  V* is symmetric with diagonal in [1, 2) and
    off-diagonal entries in [0, 0.5) masked by ``density``.  All planted
    entries live on a dyadic grid, so in the noiseless case X equals
    U* V* U*^T exactly (bitwise) and is exactly symmetric.  The noise term
    is symmetric, nonnegative, and scaled to noise_level * mean(X).
    Deterministic in ``seed``.
    """
    if m < 1 or not 1 <= r <= m:
        raise ParameterError(f"need 1 <= r <= m, got m={m}, r={r}")
    if noise_level < 0:
        raise ParameterError(f"noise_level must be nonnegative, got {noise_level}")
    if not 0.0 < density <= 1.0:
        raise ParameterError(f"density must lie in (0, 1], got {density}")
    rng = np.random.default_rng(seed)
    labels = np.arange(m) % r

    U = _grid_uniform(rng, (m, r), 0.0, 0.25) * (rng.random((m, r)) < density)
    U[np.arange(m), labels] = _grid_uniform(rng, m, 1.0, 2.0)

    diag = _grid_uniform(rng, r, 1.0, 2.0)
    off = _grid_uniform(rng, (r, r), 0.0, 0.5) * (rng.random((r, r)) < density)
    V = np.triu(off, 1)
    V = V + V.T + np.diag(diag)

    X = U @ V @ U.T
    if noise_level > 0:
        raw = rng.random((m, m))
        X = X + noise_level * X.mean() * 0.5 * (raw + raw.T)
    return X, U, V
