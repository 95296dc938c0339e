"""Spectral analysis on the graph shift operator L = I - W.

Frequencies are indexed by eigenvalues sorted in DESCENDING order throughout:
index 0 carries the highest frequency and index N-1 the lowest (eigenvalue 0,
constant eigenvector, for a balanced affinity). A signal's transform is
U^T f; smoothness is measured by the quadratic form f^T L f, which equals the
eigenvalue-weighted spectral energy sum.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
from numpy.polynomial import chebyshev as npcheb
from numpy.polynomial import polynomial as nppoly
from scipy import sparse

from .graph import GraphOperators

DENSE_EIGEN_BUDGET = 6000


@dataclass
class SpectralBasis:
    """Eigenpairs of a symmetric operator, eigenvalues descending.

    eigenvectors[:, k] belongs to eigenvalues[k]; columns are orthonormal and
    sign-fixed so that each column's first largest-magnitude component is
    positive.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @property
    def n(self) -> int:
        return self.eigenvalues.shape[0]


@dataclass
class FilterSpec:
    """A spectral filter: polynomial in L, or an ideal split at an index.

    For kind="polynomial", coeffs holds (h_1, ..., h_M); h0 is the constant
    term, fixed at 0 for smoothness penalties and free for designed filters.
    For kind="ideal_low"/"ideal_high", cutoff_index is the 1-based spectral
    index k_c of the split.
    """

    kind: str
    coeffs: tuple[float, ...] | None = None
    h0: float = 0.0
    cutoff_index: int | None = None

    def __post_init__(self) -> None:
        if self.kind == "polynomial":
            if not self.coeffs:
                raise ValueError("polynomial filter needs at least one coefficient")
            self.coeffs = tuple(float(c) for c in self.coeffs)
        elif self.kind in ("ideal_low", "ideal_high"):
            if self.cutoff_index is None or self.cutoff_index < 1:
                raise ValueError("ideal filter needs a 1-based cutoff_index >= 1")
        else:
            raise ValueError(f"unknown filter kind {self.kind!r}")

    def evaluate(self, lam: np.ndarray) -> np.ndarray:
        """Filter response h(lambda) on an array of eigenvalues (polynomial only)."""
        if self.kind != "polynomial":
            raise ValueError("only polynomial filters have a scalar response")
        lam = np.asarray(lam, dtype=np.float64)
        out = np.full_like(lam, self.h0)
        p = np.ones_like(lam)
        for c in self.coeffs:
            p = p * lam
            out = out + c * p
        return out


def eigendecompose(laplacian: np.ndarray | sparse.spmatrix,
                   budget: int = DENSE_EIGEN_BUDGET) -> SpectralBasis:
    """Dense symmetric eigendecomposition in descending eigenvalue order."""
    mat = laplacian.toarray() if sparse.issparse(laplacian) else np.asarray(laplacian, dtype=np.float64)
    n = mat.shape[0]
    if mat.ndim != 2 or mat.shape[1] != n:
        raise ValueError("operator must be square")
    if n > budget:
        raise ValueError(
            f"n={n} exceeds the dense eigendecomposition budget ({budget}); "
            "raise the budget explicitly if memory allows")
    asym = np.abs(mat - mat.T).max() if n else 0.0
    if asym > 1e-10:
        raise ValueError(f"operator is not symmetric (max asymmetry {asym:.3e})")
    vals, vecs = scipy.linalg.eigh(mat)
    vals = vals[::-1].copy()
    vecs = vecs[:, ::-1].copy()
    # Deterministic sign: first largest-magnitude component of each column > 0.
    lead = np.argmax(np.abs(vecs), axis=0)
    flip = vecs[lead, np.arange(n)] < 0
    vecs[:, flip] *= -1.0
    return SpectralBasis(eigenvalues=vals, eigenvectors=vecs)


def gft(basis: SpectralBasis, f: np.ndarray) -> np.ndarray:
    """Forward transform U^T f; accepts (N,) or (N, M), returns same shape."""
    arr = np.asarray(f, dtype=np.float64)
    if arr.shape[0] != basis.n:
        raise ValueError(f"signal has {arr.shape[0]} rows, basis has {basis.n}")
    return basis.eigenvectors.T @ arr


def igft(basis: SpectralBasis, f_hat: np.ndarray) -> np.ndarray:
    """Inverse transform U f_hat."""
    arr = np.asarray(f_hat, dtype=np.float64)
    if arr.shape[0] != basis.n:
        raise ValueError(f"spectrum has {arr.shape[0]} rows, basis has {basis.n}")
    return basis.eigenvectors @ arr


def total_variation(graph: GraphOperators, f: np.ndarray, form: str = "quadratic") -> float:
    """Signal smoothness on the graph.

    form="quadratic" is Tr(f^T L f); form="l1" is the shift deviation
    ||f - W f||_1 summed over all entries (W already has unit spectral
    radius, so no extra normalization is applied).
    """
    arr = np.asarray(f, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[:, None]
    if form == "quadratic":
        return float(np.sum(arr * (graph.laplacian @ arr)))
    if form == "l1":
        w = graph.affinity.weights
        return float(np.abs(arr - w @ arr).sum())
    raise ValueError(f"unknown total variation form {form!r}")


def quadratic_tv_edgewise(graph: GraphOperators, f: np.ndarray) -> float:
    """Cross-check form of the quadratic TV: 1/2 sum_ij w_ij ||f_i - f_j||^2.

    Matches Tr(f^T L f) up to the balancing residual (vertex degrees are one
    only to within the Sinkhorn tolerance).
    """
    arr = np.asarray(f, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[:, None]
    coo = graph.affinity.weights.tocoo()
    diff_sq = ((arr[coo.row] - arr[coo.col]) ** 2).sum(axis=1)
    return float((coo.data * diff_sq).sum()) * 0.5


def energy_profile(basis: SpectralBasis, f: np.ndarray) -> tuple[np.ndarray, float]:
    """Per-frequency spectral energy and its eigenvalue-weighted sum.

    Returns (norms, weighted) where norms[k] = ||(U^T f)_k||_2 and
    weighted = sum_k lambda_k norms[k]^2, the quadratic total variation.
    """
    f_hat = gft(basis, f)
    if f_hat.ndim == 1:
        f_hat = f_hat[:, None]
    norms = np.sqrt((f_hat**2).sum(axis=1))
    weighted = float((basis.eigenvalues * norms**2).sum())
    return norms, weighted


def ideal_split(basis: SpectralBasis, f: np.ndarray, k_c: int) -> tuple[np.ndarray, np.ndarray]:
    """Split a signal into low/high-frequency parts at 1-based index k_c.

    Spectral rows with index >= k_c (toward the smallest eigenvalues) form
    the low-frequency part; the high part is the exact remainder f - low, so
    the two always sum back to f.
    """
    if not (1 <= k_c <= basis.n):
        raise ValueError(f"k_c={k_c} out of range 1..{basis.n}")
    arr = np.asarray(f, dtype=np.float64)
    f_hat = gft(basis, arr)
    low_hat = f_hat.copy()
    low_hat[:k_c - 1] = 0.0
    low = igft(basis, low_hat)
    high = arr - low
    return low, high


def apply_poly_filter(graph: GraphOperators, fspec: FilterSpec, f: np.ndarray) -> np.ndarray:
    """Evaluate h0 f + sum_m h_m L^m f by iterated sparse products."""
    if fspec.kind != "polynomial":
        raise ValueError("apply_poly_filter requires a polynomial FilterSpec")
    arr = np.asarray(f, dtype=np.float64)
    out = fspec.h0 * arr
    p = arr
    for c in fspec.coeffs:
        p = graph.laplacian @ p
        out = out + c * p
    return out


def design_filter(eigenvalues: np.ndarray, target: np.ndarray, degree: int,
                  method: str = "least_squares",
                  include_constant: bool = False) -> tuple[FilterSpec, float]:
    """Fit a degree-`degree` polynomial response to target values on a grid.

    method="least_squares" solves the Vandermonde normal equations (with a
    1e-10 ridge retry when the grid makes them singular); the basis is
    lambda^1..lambda^M, extended with lambda^0 when include_constant is True.
    method="chebyshev" fits a Chebyshev series on [0, max eigenvalue] and
    converts it to monomial coefficients (this always carries a constant
    term). Returns the FilterSpec and the max absolute fit error on the grid.
    """
    lam = np.asarray(eigenvalues, dtype=np.float64).ravel()
    psi = np.asarray(target, dtype=np.float64).ravel()
    if lam.shape != psi.shape:
        raise ValueError("eigenvalues and target values must align")
    if degree < 1:
        raise ValueError("degree must be >= 1")

    if method == "least_squares":
        powers = range(0, degree + 1) if include_constant else range(1, degree + 1)
        theta = np.stack([lam**m for m in powers], axis=1)
        gram = theta.T @ theta
        rhs = theta.T @ psi
        try:
            coef = scipy.linalg.solve(gram, rhs, assume_a="pos")
        except scipy.linalg.LinAlgError:
            coef = scipy.linalg.solve(gram + 1e-10 * np.eye(gram.shape[0]), rhs,
                                      assume_a="pos")
        if include_constant:
            h0, coeffs = float(coef[0]), tuple(coef[1:])
        else:
            h0, coeffs = 0.0, tuple(coef)
    elif method == "chebyshev":
        lam_max = float(lam.max())
        if lam_max <= 0:
            raise ValueError("chebyshev design needs a positive top eigenvalue")
        cheb_coef = npcheb.chebfit(2.0 * lam / lam_max - 1.0, psi, degree)
        series = npcheb.Chebyshev(cheb_coef, domain=[0.0, lam_max])
        poly = series.convert(kind=nppoly.Polynomial)
        mono = np.zeros(degree + 1)
        mono[:len(poly.coef)] = poly.coef
        h0, coeffs = float(mono[0]), tuple(mono[1:])
    else:
        raise ValueError(f"unknown design method {method!r}")

    fspec = FilterSpec(kind="polynomial", coeffs=coeffs, h0=h0)
    fit_error = float(np.abs(fspec.evaluate(lam) - psi).max())
    return fspec, fit_error


def spectral_projection_regression(basis: SpectralBasis, y: np.ndarray,
                                   k_c: int) -> tuple[np.ndarray, np.ndarray]:
    """Ideal-low-pass regression: z is the low-frequency part, delta = y - z."""
    low, high = ideal_split(basis, y, k_c)
    return low, high
