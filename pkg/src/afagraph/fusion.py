"""Per-scale affinity graphs, graph fusion and bipartite partitioning."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg, sparse
from scipy.sparse.linalg import eigsh
from sklearn.cluster import KMeans
from sklearn.exceptions import ConvergenceWarning

from .features import FeatureMatrix
from .imgio import LabelMap
from .nolrr import NolrrGraph
from .superpixel import ScaleStack, SuperpixelScale

AFFINITY_MODES = ("linear", "gaussian")
GAUSSIAN_SIGMA = 20.0
DENSE_EIG_LIMIT = 3000


@dataclass
class AffinityGraph:
    A: np.ndarray
    scale_id: int = 0

    @property
    def N(self) -> int:
        return self.A.shape[0]


@dataclass
class BipartiteGraph:
    B: sparse.csr_matrix
    n_pixels: int
    shape: tuple[int, int]
    scale_sizes: list[int]
    beta: float


@dataclass
class Segmentation:
    label_map: LabelMap
    k_T: int
    config_hash: str = ""
    notes: list[str] = field(default_factory=list)


def reconstruction_errors(F: np.ndarray, adjacency: list[np.ndarray]) -> dict[tuple[int, int], float]:
    """r[i, j] = ||f_i - c_ij f_j||^2 with c_i the least-squares fit of f_i on its neighbours."""
    r = {}
    for i, nbrs in enumerate(adjacency):
        if nbrs.size == 0:
            continue
        MA = F[:, nbrs]
        c, *_ = np.linalg.lstsq(MA, F[:, i], rcond=None)  # minimum-norm when rank deficient
        res = F[:, i][:, None] - MA * c[None, :]
        for j, val in zip(nbrs.tolist(), (res**2).sum(axis=0).tolist()):
            r[(i, j)] = val
    return r


def adjacency_graph(scale: SuperpixelScale, F: FeatureMatrix | np.ndarray, mode: str = "linear", sigma: float = GAUSSIAN_SIGMA) -> AffinityGraph:
    """Neighbour-reconstruction affinities between adjacent superpixels.

    ``linear``: features are divided by the largest column norm and
    ``A_ij = max(0, 1 - (r_ij + r_ji) / 2)``.
    ``gaussian``: ``A_ij = exp(-(r_ij + r_ji) / (2 sigma^2))`` on raw features.
    """
    if mode not in AFFINITY_MODES:
        raise ValueError(f"affinity mode must be one of {AFFINITY_MODES}")
    X = F.F if isinstance(F, FeatureMatrix) else np.asarray(F, dtype=np.float64)
    N = X.shape[1]
    if mode == "linear":
        top = np.linalg.norm(X, axis=0).max()
        if top > 0:
            X = X / top
    r = reconstruction_errors(X, scale.adjacency)
    A = np.eye(N)
    for (i, j), rij in r.items():
        if j < i:
            continue
        s = rij + r.get((j, i), rij)
        A[i, j] = A[j, i] = max(0.0, 1.0 - s / 2.0) if mode == "linear" else np.exp(-s / (2 * sigma**2))
    return AffinityGraph(A=A, scale_id=scale.scale_id)


def fuse(A: AffinityGraph, W: NolrrGraph) -> AffinityGraph:
    """Overwrite affinities among global nodes with the max-normalised W."""
    out = A.A.copy()
    idx = np.asarray(W.node_index, dtype=np.int64)
    if idx.size:
        Wn = np.asarray(W.W, dtype=np.float64)
        top = Wn.max()
        Wn = Wn / top if top > 0 else Wn
        out[np.ix_(idx, idx)] = Wn
        out[idx, idx] = 1.0
    return AffinityGraph(A=out, scale_id=A.scale_id)


def bipartite(stack: ScaleStack, graphs: list[AffinityGraph], beta: float = 1e-3) -> BipartiteGraph:
    """Pixels and superpixels (X) against superpixels (Y) of every scale.

    Pixel rows link to their superpixel in each scale with weight ``beta``;
    superpixel rows link to the same scale's superpixels through ``A'``.
    """
    if len(graphs) != len(stack):
        raise ValueError("need one affinity graph per scale")
    h, w = stack.shape
    n_pix = h * w
    sizes = [s.N for s in stack]
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    n_sp = int(offsets[-1])
    rows, cols, vals = [], [], []
    pix = np.arange(n_pix)
    for k, scale in enumerate(stack):
        rows.append(pix)
        cols.append(offsets[k] + scale.labels.ravel())
        vals.append(np.full(n_pix, beta))
        coo = sparse.coo_matrix(graphs[k].A)
        rows.append(n_pix + offsets[k] + coo.row)
        cols.append(offsets[k] + coo.col)
        vals.append(coo.data)
    B = sparse.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n_pix + n_sp, n_sp)
    )
    return BipartiteGraph(B=B, n_pixels=n_pix, shape=(h, w), scale_sizes=sizes, beta=beta)


# -- transfer cut ------------------------------------------------------------


@dataclass
class TransferSpectrum:
    """Bottom eigenpairs of the bipartite graph, transferred to the X side.

    ``gamma`` are eigenvalues of the full-graph generalized problem
    (D - W) f = gamma D f; ``lam`` are those of the Y-side reduced problem,
    related by lam = gamma (2 - gamma). Columns of ``U_X`` are X-side
    parts of the full eigenvectors.
    """

    gamma: np.ndarray
    lam: np.ndarray
    U_X: np.ndarray
    V_Y: np.ndarray


def transfer_spectrum(B: sparse.spmatrix | np.ndarray, k: int) -> TransferSpectrum:
    """Solve on the small side and transfer eigenvectors to X."""
    B = sparse.csr_matrix(B, dtype=np.float64)
    dx = np.asarray(B.sum(axis=1)).ravel()
    dy = np.asarray(B.sum(axis=0)).ravel()
    if np.any(dx <= 0) or np.any(dy <= 0):
        raise ValueError("bipartite graph has isolated nodes")
    ny = B.shape[1]
    k = min(k, ny)
    Dx_inv = sparse.diags(1.0 / dx)
    WY = (B.T @ Dx_inv @ B).tocsr()
    dy_isqrt = 1.0 / np.sqrt(dy)
    S = sparse.diags(dy_isqrt) @ WY @ sparse.diags(dy_isqrt)
    # largest mu of D_Y^-1/2 W_Y D_Y^-1/2  <->  smallest lam = 1 - mu
    if ny <= DENSE_EIG_LIMIT:
        Sd = S.toarray()
        Sd = (Sd + Sd.T) / 2
        mu, Z = linalg.eigh(Sd, subset_by_index=[ny - k, ny - 1])
    else:
        mu, Z = eigsh(S, k=k, which="LA", tol=1e-12, v0=np.ones(ny))
    order = np.argsort(-mu, kind="stable")
    mu = np.clip(mu[order], 0.0, 1.0)
    Z = Z[:, order]
    lam = 1.0 - mu
    gamma = 1.0 - np.sqrt(mu)
    V = dy_isqrt[:, None] * Z  # D_Y-orthonormal
    scale = np.where(mu > 1e-12, 1.0 / np.sqrt(np.maximum(mu, 1e-300)), 1.0)
    U = (Dx_inv @ (B @ V)) * scale[None, :]
    signs_src = np.vstack([U, V])
    signs = np.sign(signs_src[np.argmax(np.abs(signs_src), axis=0), np.arange(k)])
    signs[signs == 0] = 1.0
    return TransferSpectrum(gamma=gamma, lam=lam, U_X=U * signs, V_Y=V * signs)


def cluster_rows(U: np.ndarray, k: int, seed: int = 0) -> np.ndarray:
    """Row-normalise an embedding and run seeded k-means."""
    U = U[:, :k]
    norms = np.linalg.norm(U, axis=1, keepdims=True)
    U = U / np.where(norms > 0, norms, 1.0)
    if k <= 1:
        return np.zeros(U.shape[0], dtype=np.int64)
    km = KMeans(n_clusters=k, init="k-means++", n_init=1, max_iter=300, random_state=seed)
    with warnings.catch_warnings():
        # fewer distinct rows than clusters is legitimate here (flat regions)
        warnings.simplefilter("ignore", ConvergenceWarning)
        return km.fit_predict(U).astype(np.int64)


def transfer_cut(B, k: int, seed: int = 0, rows: np.ndarray | slice | None = None) -> np.ndarray:
    """Labels for X nodes (optionally only ``rows``) from a k-way transfer cut."""
    spectrum = transfer_spectrum(B, k)
    U = spectrum.U_X if rows is None else spectrum.U_X[rows]
    return cluster_rows(U, min(k, spectrum.U_X.shape[1]), seed)


def effective_groups(B: sparse.spmatrix, k_T: int) -> int:
    """Largest usable group count: Y nodes with nonzero degree."""
    dy = np.asarray(sparse.csr_matrix(B).sum(axis=0)).ravel()
    return int(min(k_T, np.count_nonzero(dy > 0)))


def tcut(graph: BipartiteGraph, k_T: int, seed: int = 0, spectrum: TransferSpectrum | None = None, config_hash: str = "") -> Segmentation:
    """Partition pixels into at most ``k_T`` groups."""
    if k_T < 1:
        raise ValueError("k_T must be >= 1")
    notes = []
    k_eff = effective_groups(graph.B, k_T)
    if k_eff < k_T:
        notes.append(f"k_T reduced from {k_T} to {k_eff}")
    if spectrum is None or spectrum.U_X.shape[1] < k_eff:
        spectrum = transfer_spectrum(graph.B, k_eff)
    labels = cluster_rows(spectrum.U_X[: graph.n_pixels], k_eff, seed)
    return Segmentation(LabelMap(labels.reshape(graph.shape)), k_T=k_eff, config_hash=config_hash, notes=notes)

