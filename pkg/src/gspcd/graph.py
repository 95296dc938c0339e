"""Graph construction: adaptive k-NN affinities, balancing, Laplacians.

Edge weights come from a per-row constrained problem: each vertex spreads a
unit budget over its k nearest neighbours, either by the closed-form solution
of min_w <d, w> + beta ||w||^2 on the probability simplex (mode "l2") or by a
Gibbs weighting whose temperature is tuned until the row entropy hits
log(k)/2 (mode "entropy"). The row-stochastic result is made symmetric and
doubly stochastic by diagonal balancing, and the graph shift operator used
downstream is L = I - W_balanced.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import sparse


@dataclass
class SparseAffinity:
    """Nonnegative sparse vertex-affinity matrix with bookkeeping flags."""

    weights: sparse.csr_array
    symmetric: bool = False
    row_stochastic: bool = False
    doubly_stochastic: bool = False

    def __post_init__(self) -> None:
        w = sparse.csr_array(self.weights)
        if w.shape[0] != w.shape[1]:
            raise ValueError("affinity must be square")
        if w.nnz and w.data.min() < 0:
            raise ValueError("affinity weights must be nonnegative")
        self.weights = w

    @property
    def n(self) -> int:
        return self.weights.shape[0]


@dataclass
class GraphOperators:
    """A balanced affinity together with its shift operator L = I - W."""

    affinity: SparseAffinity
    laplacian: sparse.csr_array
    degree: np.ndarray

    @property
    def n(self) -> int:
        return self.affinity.n

    def laplacian_dense(self) -> np.ndarray:
        return self.laplacian.toarray()


class SinkhornError(RuntimeError):
    """Raised when diagonal balancing fails to converge."""


def pairwise_sq_distances(features: np.ndarray) -> np.ndarray:
    """Exact-symmetric matrix of squared Euclidean distances between rows."""
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError("features must be an (N, M) matrix")
    if not np.isfinite(x).all():
        raise ValueError("features contain non-finite values")
    sq = (x * x).sum(axis=1)
    d = sq[:, None] + sq[None, :] - 2.0 * (x @ x.T)
    d = 0.5 * (d + d.T)
    np.maximum(d, 0.0, out=d)
    np.fill_diagonal(d, 0.0)
    return d


def _neighbor_order(dist_row: np.ndarray, self_idx: int) -> np.ndarray:
    """Candidate neighbours sorted by (distance, index), self excluded."""
    d = dist_row.copy()
    d[self_idx] = np.inf
    return np.argsort(d, kind="stable")


def _l2_row(dist: np.ndarray, order: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Closed-form simplex weights over the k nearest neighbours.

    With ascending neighbour distances d_(1) <= ... <= d_(k+1), the largest
    regularizer that keeps exactly k weights active gives
    w_(j) = (d_(k+1) - d_(j)) / (k d_(k+1) - sum_{h<=k} d_(h)).
    """
    n = dist.shape[0]
    idx = order[:k]
    dk = dist[idx]
    if k == n - 1:
        # No (k+1)-th neighbour exists; use the maximally smooth solution.
        return idx, np.full(k, 1.0 / k)
    d_next = dist[order[k]]
    if d_next == dk[0]:
        # All k+1 candidate distances coincide: degenerate row.
        return idx, np.full(k, 1.0 / k)
    denom = k * d_next - dk.sum()
    return idx, (d_next - dk) / denom


def _entropy_row(dist: np.ndarray, order: np.ndarray, k: int,
                 tol: float = 1e-6) -> tuple[np.ndarray, np.ndarray]:
    """Gibbs weights over the k nearest neighbours at half-uniform entropy.

    The temperature is found by bisection so that -sum w log w = log(k)/2.
    Rows whose k candidate distances all coincide fall back to uniform.
    """
    idx = order[:k]
    dk = dist[idx]
    if k == 1:
        return idx, np.ones(1)
    span = dk[-1] - dk[0]
    if span == 0.0:
        return idx, np.full(k, 1.0 / k)
    target = np.log(k) / 2.0

    def weights_at(beta: float) -> np.ndarray:
        e = np.exp(-(dk - dk[0]) / beta)
        return e / e.sum()

    def entropy_at(beta: float) -> float:
        w = weights_at(beta)
        nz = w[w > 0]
        return float(-(nz * np.log(nz)).sum())

    lo, hi = span, span
    for _ in range(200):
        if entropy_at(lo) <= target:
            break
        lo /= 2.0
    for _ in range(200):
        if entropy_at(hi) >= target:
            break
        hi *= 2.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        h = entropy_at(mid)
        if abs(h - target) <= tol:
            return idx, weights_at(mid)
        if h < target:
            lo = mid
        else:
            hi = mid
    return idx, weights_at(0.5 * (lo + hi))


def build_adaptive_affinity(dist: np.ndarray, k: int, mode: str = "l2") -> SparseAffinity:
    """Row-stochastic affinity with at most k nonzeros per row.

    dist is a symmetric matrix of squared distances; ties in neighbour
    selection break by lower index. Returns a row-stochastic SparseAffinity
    with zero diagonal.
    """
    d = np.asarray(dist, dtype=np.float64)
    n = d.shape[0]
    if d.ndim != 2 or d.shape[1] != n:
        raise ValueError("dist must be square")
    if not (1 <= k <= n - 1):
        raise ValueError(f"k={k} out of range for n={n}")
    if mode not in ("l2", "entropy"):
        raise ValueError(f"unknown affinity mode {mode!r}")

    rows = np.repeat(np.arange(n), k)
    cols = np.empty(n * k, dtype=np.int64)
    vals = np.empty(n * k, dtype=np.float64)
    for i in range(n):
        order = _neighbor_order(d[i], i)
        if mode == "l2":
            idx, w = _l2_row(d[i], order, k)
        else:
            idx, w = _entropy_row(d[i], order, k)
        cols[i * k:(i + 1) * k] = idx
        vals[i * k:(i + 1) * k] = w
    w = sparse.csr_array((vals, (rows, cols)), shape=(n, n))
    w.eliminate_zeros()
    return SparseAffinity(w, row_stochastic=True)


def build_kfn_affinity(dist: np.ndarray, k: int) -> SparseAffinity:
    """Mutual k-farthest-neighbour affinity with uniform weights 1/k.

    Vertices i and j are linked when d_ij is among the k largest entries of
    row i or of row j; the union is realized by elementwise max of the
    directed weights with their transpose.
    """
    d = np.asarray(dist, dtype=np.float64)
    n = d.shape[0]
    if d.ndim != 2 or d.shape[1] != n:
        raise ValueError("dist must be square")
    if not (1 <= k <= n - 1):
        raise ValueError(f"k={k} out of range for n={n}")

    rows = np.repeat(np.arange(n), k)
    cols = np.empty(n * k, dtype=np.int64)
    for i in range(n):
        dd = d[i].copy()
        dd[i] = -np.inf
        order = np.argsort(-dd, kind="stable")
        cols[i * k:(i + 1) * k] = order[:k]
    w = sparse.csr_array((np.full(n * k, 1.0 / k), (rows, cols)), shape=(n, n))
    w = w.maximum(w.T)
    return SparseAffinity(sparse.csr_array(w), symmetric=True)


def sinkhorn_symmetrize(aff: SparseAffinity, tol: float = 1e-12,
                        max_iter: int = 500) -> SparseAffinity:
    """Diagonal balancing to a symmetric doubly stochastic affinity.

    The input is first symmetrized as (W + W^T)/2, then scaled as
    D W D with D = diag(phi)^(-1/2) updated from the current row sums until
    the worst row/column-sum deviation falls below tol (or 1e-6 at the
    iteration cap, past which SinkhornError is raised). The product is formed
    entrywise as w_ij * (phi_i * phi_j), which keeps it exactly symmetric.
    """
    w0 = aff.weights.tocoo()
    sym = (w0 + w0.T) * 0.5
    sym = sym.tocoo()
    n = sym.shape[0]
    row_sums = np.bincount(sym.row, weights=sym.data, minlength=n)
    if (row_sums == 0).any():
        raise SinkhornError("affinity has an all-zero row; graph must be connected enough to balance")

    phi = np.ones(n)
    data = sym.data
    for _ in range(max_iter):
        scaled = data * (phi[sym.row] * phi[sym.col])
        sums = np.bincount(sym.row, weights=scaled, minlength=n)
        deviation = float(np.abs(sums - 1.0).max())
        if deviation <= tol:
            break
        phi /= np.sqrt(sums)
    else:
        scaled = data * (phi[sym.row] * phi[sym.col])
        sums = np.bincount(sym.row, weights=scaled, minlength=n)
        deviation = float(np.abs(sums - 1.0).max())
        if deviation > 1e-6:
            raise SinkhornError(
                f"balancing stalled at deviation {deviation:.3e} after {max_iter} iterations")

    out = sparse.csr_array(sparse.coo_array((scaled, (sym.row, sym.col)), shape=(n, n)))
    return SparseAffinity(out, symmetric=True, row_stochastic=True, doubly_stochastic=True)


def laplacian_from_affinity(aff: SparseAffinity) -> GraphOperators:
    """Shift operator L = I - W for a balanced affinity.

    L is symmetric positive semidefinite with eigenvalues in [0, 2] and the
    constant vector in its null space.
    """
    w = aff.weights
    n = aff.n
    row_sums = np.asarray(w.sum(axis=1)).ravel()
    col_sums = np.asarray(w.sum(axis=0)).ravel()
    dev = max(np.abs(row_sums - 1.0).max(), np.abs(col_sums - 1.0).max())
    if not aff.doubly_stochastic or dev > 1e-5:
        raise ValueError(f"affinity is not doubly stochastic (deviation {dev:.3e})")
    lap = sparse.csr_array(sparse.eye_array(n, format="csr") - w)
    return GraphOperators(affinity=aff, laplacian=lap, degree=row_sums)


def build_graph(features: np.ndarray, k: int, mode: str = "l2") -> GraphOperators:
    """Full chain: squared distances -> adaptive affinity -> balancing -> L."""
    d = pairwise_sq_distances(features)
    aff = build_adaptive_affinity(d, k=k, mode=mode)
    balanced = sinkhorn_symmetrize(aff)
    return laplacian_from_affinity(balanced)
