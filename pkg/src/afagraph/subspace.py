"""Sparse self-expression of superpixel features by orthogonal matching pursuit."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

from .features import FeatureMatrix


@dataclass
class OMPTrace:
    """Per-iteration diagnostics of one OMP solve."""

    residual_norms: list[float] = field(default_factory=list)
    # max_j |x_j^T r| / (||x_j|| ||y||) over the support after each least-squares step
    orthogonality: list[float] = field(default_factory=list)


@dataclass
class SparseCoeffMatrix:
    C_star: sparse.csc_matrix
    psi: int
    tau: float

    @property
    def N(self) -> int:
        return self.C_star.shape[0]


def omp_column(X: np.ndarray, y: np.ndarray, psi: int = 3, tau: float = 1e-6, trace: OMPTrace | None = None) -> np.ndarray:
    """Greedy sparse approximation of ``y`` over the columns of ``X``.

    Stops when ``psi`` atoms are selected or the residual drops to
    ``tau * ||y||``. Correlation ties go to the lowest column index.
    Returns the dense coefficient vector of length ``X.shape[1]``.
    """
    if psi < 1:
        raise ValueError("psi must be >= 1")
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    coef = np.zeros(X.shape[1])
    y_norm = np.linalg.norm(y)
    if y_norm == 0.0 or X.shape[1] == 0:
        return coef
    support: list[int] = []
    residual = y.copy()
    sol = np.zeros(0)
    limit = min(psi, X.shape[1])
    while len(support) < limit and np.linalg.norm(residual) > tau * y_norm:
        corr = np.abs(X.T @ residual)
        corr[support] = -1.0
        best = int(np.argmax(corr))  # first maximum = lowest index
        if corr[best] <= 0.0:
            break
        support.append(best)
        sub = X[:, support]
        sol, *_ = np.linalg.lstsq(sub, y, rcond=None)
        residual = y - sub @ sol
        if trace is not None:
            trace.residual_norms.append(float(np.linalg.norm(residual)))
            denom = np.linalg.norm(sub, axis=0) * y_norm
            trace.orthogonality.append(float(np.max(np.abs(sub.T @ residual) / denom)))
    coef[support] = sol
    return coef


def spr_matrix(F: FeatureMatrix | np.ndarray, psi: int = 3, tau: float = 1e-6) -> SparseCoeffMatrix:
    """Column j solves OMP on all other columns, with a zero at position j."""
    X = F.F if isinstance(F, FeatureMatrix) else np.asarray(F, dtype=np.float64)
    N = X.shape[1]
    if N < 2:
        raise ValueError("need at least two columns")
    rows, cols, vals = [], [], []
    idx = np.arange(N)
    for j in range(N):
        others = np.delete(idx, j)
        c = omp_column(X[:, others], X[:, j], psi, tau)
        nz = np.flatnonzero(c)
        rows.append(others[nz])
        cols.append(np.full(nz.size, j))
        vals.append(c[nz])
    C = sparse.csc_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(N, N)
    )
    return SparseCoeffMatrix(C_star=C, psi=psi, tau=tau)


def symmetrize(C: SparseCoeffMatrix | sparse.spmatrix | np.ndarray) -> np.ndarray:
    """Dense ``|C| + |C|^T``."""
    M = C.C_star if isinstance(C, SparseCoeffMatrix) else C
    M = M.toarray() if sparse.issparse(M) else np.asarray(M, dtype=np.float64)
    A = np.abs(M)
    return A + A.T


def write_coo(matrix, path) -> None:
    """Dump nonzeros as ``row col value`` lines."""
    coo = sparse.coo_matrix(matrix)
    with open(path, "w") as fh:
        for r, c, v in zip(coo.row, coo.col, coo.data):
            fh.write(f"{r} {c} {v:.17g}\n")
