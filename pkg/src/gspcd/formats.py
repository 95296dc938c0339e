"""On-disk formats: GSPM binary matrices, affinity coordinate lists, CSV traces.

GSPM is the package's exact-value matrix container:

    bytes 0..3   magic ``b"GSPM"``
    bytes 4..7   rows, little-endian uint32
    bytes 8..11  cols, little-endian uint32
    then rows*cols little-endian float64 values, row-major

Everything here round-trips exactly; text formats carry enough digits to
reproduce float64 values.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np
from scipy import sparse

GSPM_MAGIC = b"GSPM"


def write_gspm(path: str | Path, matrix: np.ndarray) -> None:
    """Write a 2-D float64 matrix to ``path`` in GSPM format."""
    m = np.ascontiguousarray(np.asarray(matrix, dtype=np.float64))
    if m.ndim != 2:
        raise ValueError(f"GSPM stores 2-D matrices, got shape {m.shape}")
    rows, cols = m.shape
    with open(path, "wb") as fh:
        fh.write(GSPM_MAGIC)
        fh.write(struct.pack("<II", rows, cols))
        fh.write(m.astype("<f8").tobytes(order="C"))


def read_gspm(path: str | Path) -> np.ndarray:
    """Read a GSPM file back into a float64 array of shape (rows, cols)."""
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != GSPM_MAGIC:
            raise ValueError(f"{path}: bad magic {magic!r}, expected {GSPM_MAGIC!r}")
        header = fh.read(8)
        if len(header) != 8:
            raise ValueError(f"{path}: truncated header")
        rows, cols = struct.unpack("<II", header)
        payload = fh.read(rows * cols * 8)
    if len(payload) != rows * cols * 8:
        raise ValueError(f"{path}: truncated payload ({len(payload)} bytes)")
    data = np.frombuffer(payload, dtype="<f8")
    return data.reshape(rows, cols).copy()


def write_affinity_coo(path: str | Path, weights: sparse.spmatrix | np.ndarray) -> None:
    """Export an affinity matrix as coordinate-list text.

    First line is ``N nnz``; each following line is ``i j w`` with
    0-based indices and weights at 17 significant digits (float64 exact).
    Entries are written in row-major order.
    """
    coo = sparse.coo_array(weights)
    n_rows, n_cols = coo.shape
    if n_rows != n_cols:
        raise ValueError("affinity must be square")
    order = np.lexsort((coo.col, coo.row))
    rows, cols, vals = coo.row[order], coo.col[order], coo.data[order]
    with open(path, "w") as fh:
        fh.write(f"{n_rows} {len(vals)}\n")
        for i, j, w in zip(rows, cols, vals):
            fh.write(f"{i} {j} {w:.17g}\n")


def read_affinity_coo(path: str | Path) -> sparse.csr_array:
    """Read a coordinate-list affinity file written by write_affinity_coo."""
    with open(path) as fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise ValueError(f"{path}: expected 'N nnz' header")
        n, nnz = int(header[0]), int(header[1])
        rows = np.empty(nnz, dtype=np.int64)
        cols = np.empty(nnz, dtype=np.int64)
        vals = np.empty(nnz, dtype=np.float64)
        for idx in range(nnz):
            parts = fh.readline().split()
            if len(parts) != 3:
                raise ValueError(f"{path}: truncated at entry {idx}")
            rows[idx], cols[idx], vals[idx] = int(parts[0]), int(parts[1]), float(parts[2])
    return sparse.csr_array((vals, (rows, cols)), shape=(n, n))


def write_energy_csv(path: str | Path, eigenvalues: np.ndarray, norms: np.ndarray) -> None:
    """Write a spectral energy profile as two-column CSV ``lambda, norm``."""
    lam = np.asarray(eigenvalues, dtype=float)
    nrm = np.asarray(norms, dtype=float)
    if lam.shape != nrm.shape:
        raise ValueError("eigenvalues and norms must align")
    with open(path, "w") as fh:
        fh.write("lambda,norm\n")
        for lk, nk in zip(lam, nrm):
            fh.write(f"{lk:.17g},{nk:.17g}\n")


def write_trace_csv(path: str | Path, rows: list[tuple[int, float, float, float]]) -> None:
    """Write a per-iteration solver trace: ``iter, xi, feasibility, objective``."""
    with open(path, "w") as fh:
        fh.write("iter,xi,feasibility,objective\n")
        for it, xi, feas, obj in rows:
            fh.write(f"{it},{xi:.17g},{feas:.17g},{obj:.17g}\n")


def read_table_csv(path: str | Path) -> tuple[list[str], np.ndarray]:
    """Read back any CSV written by this module: (column names, float data)."""
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        rows = [line.strip().split(",") for line in fh if line.strip()]
    data = np.array([[float(v) for v in row] for row in rows], dtype=np.float64)
    return header, data.reshape(-1, len(header))


def write_sweep_csv(path: str | Path, sweep: np.ndarray) -> None:
    """Write a threshold sweep as ``threshold,fpr,tpr,precision,recall`` CSV."""
    arr = np.asarray(sweep, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 5:
        raise ValueError("sweep must be an (n, 5) array")
    with open(path, "w") as fh:
        fh.write("threshold,fpr,tpr,precision,recall\n")
        for row in arr:
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")
