"""Noise-free online low-rank representation (single pass over the samples).

The solver keeps a basis dictionary ``D`` (n x d) and three fixed-size
accumulators, so memory excluding the per-sample coefficient rows does
not grow with the number of samples. After the pass, ``C = U V^T`` gives
the representation and ``W = (|C| + |C|^T) / 2`` the graph.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

M_UPDATES = ("algo2", "eq15")


@dataclass
class NolrrState:
    D: np.ndarray
    A_acc: np.ndarray
    B_acc: np.ndarray
    M_acc: np.ndarray
    U: np.ndarray
    V: np.ndarray
    t: int = 0
    lambda1: float = 1.0
    lambda2_ini: float = 1.0
    m_update: str = "eq15"
    max_passes: int = 10
    tol: float = 1e-8

    @property
    def n(self) -> int:
        return self.D.shape[0]

    @property
    def d(self) -> int:
        return self.D.shape[1]

    @property
    def N(self) -> int:
        return self.U.shape[0]

    @property
    def lambda2(self) -> float:
        return np.sqrt(max(self.t, 1)) * self.lambda2_ini

    def solver_size(self) -> int:
        """Number of stored floats excluding the U, V rows."""
        return self.D.size + self.A_acc.size + self.B_acc.size + self.M_acc.size


@dataclass
class NolrrGraph:
    W: np.ndarray
    node_index: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))


def nolrr_init(
    n: int,
    d: int,
    N: int,
    seed: int = 0,
    lambda1: float = 1.0,
    m_update: str = "eq15",
) -> NolrrState:
    """Fresh solver for ``N`` samples of dimension ``n``; rank is clamped to N."""
    if n < 1 or d < 1:
        raise ValueError("n and d must be >= 1")
    if m_update not in M_UPDATES:
        raise ValueError(f"m_update must be one of {M_UPDATES}")
    d_eff = min(d, N) if N > 0 else d
    rng = np.random.default_rng(seed)
    D0 = rng.standard_normal((n, d_eff)) / np.sqrt(n)
    return NolrrState(
        D=D0,
        A_acc=np.zeros((d_eff, d_eff)),
        B_acc=np.zeros((n, d_eff)),
        M_acc=np.zeros((n, d_eff)),
        U=np.zeros((N, d_eff)),
        V=np.zeros((N, d_eff)),
        t=0,
        lambda1=lambda1,
        lambda2_ini=1.0 / np.sqrt(n),
        m_update=m_update,
    )


def solve_v(D: np.ndarray, f: np.ndarray, lambda1: float) -> np.ndarray:
    """argmin_v  lambda1/2 ||f - D v||^2 + 1/2 ||v||^2."""
    d = D.shape[1]
    return lambda1 * np.linalg.solve(lambda1 * D.T @ D + np.eye(d), D.T @ f)


def solve_u(D: np.ndarray, M_prev: np.ndarray, y: np.ndarray, lambda2: float) -> np.ndarray:
    """argmin_u  1/2 ||u||^2 + lambda2/2 ||D - M_prev - y u^T||_F^2."""
    return lambda2 / (lambda2 * (y @ y) + 1.0) * ((D - M_prev).T @ y)


def dictionary_objective(D, A_acc, B_acc, M_acc, lambda1, lambda2) -> float:
    """1/2 Tr(D^T D (l1 A + l2 I)) - Tr(D^T (l1 B + l2 M))."""
    G = lambda1 * A_acc + lambda2 * np.eye(A_acc.shape[0])
    H = lambda1 * B_acc + lambda2 * M_acc
    return 0.5 * np.sum((D @ G) * D) - np.sum(D * H)


def bcd_dictionary(D, A_acc, B_acc, M_acc, lambda1, lambda2, max_passes=10, tol=1e-8, history=None) -> np.ndarray:
    """Column-wise block coordinate descent on the dictionary objective."""
    D = D.copy()
    G = lambda1 * A_acc + lambda2 * np.eye(A_acc.shape[0])
    H = lambda1 * B_acc + lambda2 * M_acc
    prev = dictionary_objective(D, A_acc, B_acc, M_acc, lambda1, lambda2)
    if history is not None:
        history.append(prev)
    for _ in range(max_passes):
        for j in range(D.shape[1]):
            # exact minimiser of the objective in column j, others fixed
            D[:, j] += (H[:, j] - D @ G[:, j]) / G[j, j]
        obj = dictionary_objective(D, A_acc, B_acc, M_acc, lambda1, lambda2)
        if history is not None:
            history.append(obj)
        if abs(prev - obj) <= tol * max(abs(prev), 1e-300):
            break
        prev = obj
    return D


def update_dictionary(state: NolrrState) -> np.ndarray:
    """Closed-form solve when well conditioned, else block coordinate descent."""
    lam2 = state.lambda2
    G = state.lambda1 * state.A_acc + lam2 * np.eye(state.d)
    H = state.lambda1 * state.B_acc + lam2 * state.M_acc
    if np.linalg.cond(G) < 1e10:
        return np.linalg.solve(G, H.T).T
    return bcd_dictionary(
        state.D, state.A_acc, state.B_acc, state.M_acc, state.lambda1, lam2, state.max_passes, state.tol
    )


def nolrr_step(state: NolrrState, f_t: np.ndarray, y_t: np.ndarray | None = None) -> NolrrState:
    """Consume one sample; updates ``state`` in place and returns it."""
    f_t = np.asarray(f_t, dtype=np.float64)
    y_t = f_t if y_t is None else np.asarray(y_t, dtype=np.float64)
    if not (np.all(np.isfinite(f_t)) and np.all(np.isfinite(y_t))):
        raise ValueError("non-finite input sample")
    if state.t >= state.N:
        raise ValueError("all samples already consumed")
    state.t += 1
    lam2 = state.lambda2
    v = solve_v(state.D, f_t, state.lambda1)
    u = solve_u(state.D, state.M_acc, y_t, lam2)
    state.A_acc += np.outer(v, v)
    state.B_acc += np.outer(f_t, v)
    if state.m_update == "algo2":
        state.M_acc += np.outer(f_t, v)
    else:
        state.M_acc += np.outer(y_t, u)
    state.D = update_dictionary(state)
    state.U[state.t - 1] = u
    state.V[state.t - 1] = v
    return state


def nolrr_graph(state: NolrrState, node_index=None) -> NolrrGraph:
    if state.t != state.N:
        raise ValueError(f"solver saw {state.t} of {state.N} samples")
    C = state.U @ state.V.T
    W = (np.abs(C) + np.abs(C).T) / 2.0
    idx = np.arange(state.N) if node_index is None else np.asarray(node_index, dtype=np.int64)
    return NolrrGraph(W=W, node_index=idx)


def run_nolrr(F: np.ndarray, d: int = 50, seed: int = 0, lambda1: float = 1.0, m_update: str = "eq15", node_index=None) -> tuple[NolrrGraph, NolrrState]:
    """Single pass over the columns of ``F`` (Y = F)."""
    F = np.asarray(F, dtype=np.float64)
    n, N = F.shape
    state = nolrr_init(n, d, N, seed=seed, lambda1=lambda1, m_update=m_update)
    for t in range(N):
        nolrr_step(state, F[:, t])
    return nolrr_graph(state, node_index), state


# -- objectives used for verification ----------------------------------------


def lrr_objective(F, D, U, V, lambda1, lambda2, Y=None) -> float:
    """Regularized factorized LRR cost on the full data."""
    Y = F if Y is None else Y
    return float(
        lambda1 / 2 * np.sum((F - D @ V.T) ** 2)
        + 0.5 * (np.sum(U**2) + np.sum(V**2))
        + lambda2 / 2 * np.sum((D - Y @ U) ** 2)
    )


def surrogate(state: NolrrState, F_seen: np.ndarray, D: np.ndarray | None = None) -> float:
    """g_t(D) built from the stored coefficients of the first t samples."""
    D = state.D if D is None else D
    t = state.t
    V = state.V[:t]
    U = state.U[:t]
    lam2 = state.lambda2
    loss1 = state.lambda1 / 2 * np.sum((F_seen - D @ V.T) ** 2) + 0.5 * np.sum(V**2)
    return float((loss1 + 0.5 * np.sum(U**2) + lam2 / 2 * np.sum((D - state.M_acc) ** 2)) / t)


def empirical_cost(state: NolrrState, F_seen: np.ndarray, D: np.ndarray | None = None) -> float:
    """f_t(D) with every coefficient re-minimized for the given dictionary.

    The representation term is minimised jointly over all t coefficient
    rows, ``min_U 1/2 ||U||^2 + lambda2/2 ||D - Y_t U||^2``.
    """
    D = state.D if D is None else D
    t = state.t
    lam1, lam2 = state.lambda1, state.lambda2
    d = D.shape[1]
    Vopt = lam1 * np.linalg.solve(lam1 * D.T @ D + np.eye(d), D.T @ F_seen).T
    loss1 = lam1 / 2 * np.sum((F_seen - D @ Vopt.T) ** 2) + 0.5 * np.sum(Vopt**2)
    Y = F_seen
    # push-through identity keeps the solve n x n
    Uopt = lam2 * Y.T @ np.linalg.solve(lam2 * Y @ Y.T + np.eye(Y.shape[0]), D)
    loss2 = 0.5 * np.sum(Uopt**2) + lam2 / 2 * np.sum((D - Y @ Uopt) ** 2)
    return float((loss1 + loss2) / t)
