"""Global node selection: similarity, affinity propagation, spectral clustering."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import linalg
from scipy.spatial.distance import cdist
from sklearn.cluster import KMeans
from sklearn.exceptions import ConvergenceWarning

from .features import FeatureMatrix

NODE_RULES = ("size_window", "all_clusters", "largest_excluded")


@dataclass
class PairwiseSimilarity:
    S: np.ndarray
    preference: float

    @property
    def N(self) -> int:
        return self.S.shape[0]


@dataclass
class ClusterAssignment:
    labels: np.ndarray
    exemplars: np.ndarray

    @property
    def K(self) -> int:
        return int(self.labels.max()) + 1 if self.labels.size else 0

    def sizes(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.K)


def _median_offdiag(S: np.ndarray) -> float:
    N = S.shape[0]
    if N < 2:
        return 0.0
    return float(np.median(S[~np.eye(N, dtype=bool)]))


def similarity(F: FeatureMatrix | np.ndarray, e: float = 3.0, g: float = 5.0, preference: float | None = None) -> PairwiseSimilarity:
    """Euclidean plus index-path distance similarity between feature columns.

    For i < j::

        S[i, j] = -(d(i, j)**e + (sum_{x=i}^{j-1} d(x, x+1))**g) ** 0.5

    mirrored to the lower triangle. The diagonal holds ``preference``
    (median of the off-diagonal values when not given).
    """
    if e <= 0 or g <= 0:
        raise ValueError("e and g must be positive")
    X = F.F if isinstance(F, FeatureMatrix) else np.asarray(F, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    d = cdist(X.T, X.T)
    steps = np.sqrt((np.diff(X, axis=1) ** 2).sum(axis=0))
    cum = np.concatenate([[0.0], np.cumsum(steps)])
    path = np.abs(cum[None, :] - cum[:, None])
    S = -np.sqrt(d**e + path**g)
    if preference is None:
        preference = _median_offdiag(S)
    np.fill_diagonal(S, preference)
    return PairwiseSimilarity(S=S, preference=float(preference))


def negative_sq_euclidean(points: np.ndarray, preference: float | None = None) -> PairwiseSimilarity:
    """Standard APC similarity, rows of ``points`` are samples."""
    P = np.asarray(points, dtype=np.float64)
    S = -cdist(P, P, "sqeuclidean")
    if preference is None:
        preference = _median_offdiag(S)
    np.fill_diagonal(S, preference)
    return PairwiseSimilarity(S=S, preference=float(preference))


def affinity_propagation(
    sim: PairwiseSimilarity | np.ndarray,
    damping: float = 0.9,
    max_iter: int = 1000,
    conv_window: int = 50,
) -> ClusterAssignment:
    """Exemplar clustering by responsibility/availability message passing."""
    if not 0.5 <= damping < 1.0:
        raise ValueError("damping must lie in [0.5, 1)")
    S = np.array(sim.S if isinstance(sim, PairwiseSimilarity) else sim, dtype=np.float64)
    N = S.shape[0]
    if N == 1:
        return ClusterAssignment(np.zeros(1, dtype=np.int64), np.zeros(1, dtype=np.int64))
    off = S[~np.eye(N, dtype=bool)]
    if np.all(off == off[0]):
        return ClusterAssignment(np.zeros(N, dtype=np.int64), np.zeros(1, dtype=np.int64))

    # fixed jitter, tiny relative to the similarity range, settles exact ties;
    # machine-epsilon noise is too small and lets the result flip with damping
    rng = np.random.default_rng(0)
    S = S + 1e-12 * np.ptp(S[np.isfinite(S)]) * rng.standard_normal((N, N))

    R = np.zeros((N, N))
    A = np.zeros((N, N))
    rows = np.arange(N)
    history = np.zeros((conv_window, N), dtype=bool)
    for it in range(max_iter):
        AS = A + S
        first = np.argmax(AS, axis=1)
        first_val = AS[rows, first]
        AS[rows, first] = -np.inf
        second_val = AS.max(axis=1)
        R_new = S - first_val[:, None]
        R_new[rows, first] = S[rows, first] - second_val
        R = damping * R + (1 - damping) * R_new

        Rp = np.maximum(R, 0)
        Rp[rows, rows] = R[rows, rows]
        A_new = Rp.sum(axis=0)[None, :] - Rp
        diag = A_new[rows, rows].copy()
        A_new = np.minimum(A_new, 0)
        A_new[rows, rows] = diag
        A = damping * A + (1 - damping) * A_new

        is_ex = (np.diag(A) + np.diag(R)) > 0
        history[it % conv_window] = is_ex
        if it >= conv_window and np.all(history == is_ex[None, :]):
            break

    exemplars = np.flatnonzero(np.diag(A) + np.diag(R) > 0)
    if exemplars.size == 0:
        exemplars = np.array([int(np.argmax(np.diag(A) + np.diag(R)))])
    labels = np.argmax(S[:, exemplars], axis=1)
    labels[exemplars] = np.arange(exemplars.size)
    return ClusterAssignment(labels.astype(np.int64), exemplars.astype(np.int64))


def _kmeans(X: np.ndarray, k: int, seed: int) -> np.ndarray:
    k = min(k, X.shape[0])
    if k <= 1:
        return np.zeros(X.shape[0], dtype=np.int64)
    km = KMeans(n_clusters=k, init="k-means++", n_init=1, max_iter=300, random_state=seed)
    with warnings.catch_warnings():
        # fewer distinct rows than clusters is legitimate here (flat regions)
        warnings.simplefilter("ignore", ConvergenceWarning)
        return km.fit_predict(X).astype(np.int64)


def _dense_labels(labels: np.ndarray) -> np.ndarray:
    _, first, inv = np.unique(labels, return_index=True, return_inverse=True)
    rank = np.empty(first.size, dtype=np.int64)
    rank[np.argsort(first, kind="stable")] = np.arange(first.size)
    return rank[inv.ravel()]


def top_eigenvectors(M: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Largest ``k`` eigenpairs of a symmetric matrix, descending."""
    n = M.shape[0]
    w, V = linalg.eigh(M, subset_by_index=[n - k, n - 1])
    return w[::-1], V[:, ::-1]


def spectral_cluster(M: np.ndarray, K: int, seed: int = 0) -> ClusterAssignment:
    """Normalized spectral clustering of a symmetric nonnegative affinity.

    Rows with zero degree each become a singleton cluster before the
    remaining nodes are embedded and clustered.
    """
    M = np.asarray(M, dtype=np.float64)
    N = M.shape[0]
    if not 1 <= K <= N:
        raise ValueError(f"K={K} outside [1, {N}]")
    labels = np.zeros(N, dtype=np.int64)
    if K == 1:
        return ClusterAssignment(labels, np.zeros(1, dtype=np.int64))
    deg = M.sum(axis=1)
    isolated = np.flatnonzero(deg <= 0)
    active = np.flatnonzero(deg > 0)
    k_rest = max(1, K - isolated.size)
    if active.size:
        sub = M[np.ix_(active, active)]
        dinv = 1.0 / np.sqrt(deg[active])
        L = dinv[:, None] * sub * dinv[None, :]
        k_rest = min(k_rest, active.size)
        _, V = top_eigenvectors(L, k_rest)
        norms = np.linalg.norm(V, axis=1, keepdims=True)
        V = V / np.where(norms > 0, norms, 1.0)
        labels[active] = _kmeans(V, k_rest, seed)
        offset = labels[active].max() + 1
    else:
        offset = 0
    labels[isolated] = offset + np.arange(isolated.size)
    labels = _dense_labels(labels)
    exemplars = np.array([np.flatnonzero(labels == c)[0] for c in range(labels.max() + 1)])
    return ClusterAssignment(labels, exemplars)


def kmeans_cluster(F: np.ndarray, K: int, seed: int = 0) -> ClusterAssignment:
    """k-means on feature columns (ablation baseline)."""
    labels = _dense_labels(_kmeans(np.asarray(F, dtype=np.float64).T, K, seed))
    exemplars = np.array([np.flatnonzero(labels == c)[0] for c in range(labels.max() + 1)])
    return ClusterAssignment(labels, exemplars)


def select_global_nodes(assign: ClusterAssignment, rule: str = "size_window") -> np.ndarray:
    """Superpixel indices designated as global nodes.

    ``size_window``: union of clusters with 2 <= size <= ceil(N/2), falling
    back to the largest cluster when that union is empty.
    ``all_clusters``: every node. ``largest_excluded``: everything except
    the largest cluster.
    """
    labels = assign.labels
    N = labels.size
    sizes = assign.sizes()
    if rule == "all_clusters":
        return np.arange(N)
    if rule == "largest_excluded":
        return np.flatnonzero(labels != int(np.argmax(sizes)))
    if rule != "size_window":
        raise ValueError(f"unknown node rule {rule!r}")
    keep = (sizes >= 2) & (sizes <= math.ceil(N / 2))
    if not keep.any():
        keep = np.zeros_like(keep)
        keep[int(np.argmax(sizes))] = True
    return np.flatnonzero(keep[labels])


def area_global_nodes(areas: np.ndarray, low: float = 1 / 3, high: float = 2 / 3) -> np.ndarray:
    """Medium-area superpixels (between the given area quantiles)."""
    areas = np.asarray(areas, dtype=np.float64)
    lo, hi = np.quantile(areas, [low, high])
    return np.flatnonzero((areas >= lo) & (areas <= hi))
