"""Slow, straightforward reference implementations used as test oracles.

Each one follows the textbook definition directly (explicit pair loops,
per-pixel sets, exhaustive search) and shares no code with the package.
"""

from __future__ import annotations

import itertools
import math
from collections import Counter

import numpy as np
from scipy import linalg
from scipy.optimize import linear_sum_assignment, minimize

# -- colour ---------------------------------------------------------------------


def srgb8_to_lab(r, g, b):
    """Scalar sRGB (0..255) to CIE L*a*b* (D65), written from the CIE formulas."""

    def lin(c):
        c = c / 255.0
        return c / 12.92 if c <= 0.04045 else ((c + 0.055) / 1.055) ** 2.4

    R, G, B = lin(r), lin(g), lin(b)
    X = 0.4124564 * R + 0.3575761 * G + 0.1804375 * B
    Y = 0.2126729 * R + 0.7151522 * G + 0.0721750 * B
    Z = 0.0193339 * R + 0.1191920 * G + 0.9503041 * B
    Xn, Yn, Zn = 0.95047, 1.0, 1.08883

    def f(t):
        return t ** (1 / 3) if t > (6 / 29) ** 3 else t / (3 * (6 / 29) ** 2) + 4 / 29

    fx, fy, fz = f(X / Xn), f(Y / Yn), f(Z / Zn)
    return 116 * fy - 16, 500 * (fx - fy), 200 * (fy - fz)


# -- metrics --------------------------------------------------------------------


def brute_pri(seg, gts):
    s = np.asarray(seg).ravel()
    gs = [np.asarray(g).ravel() for g in gts]
    n = s.size
    total = 0.0
    count = 0
    for i in range(n):
        for j in range(i + 1, n):
            c = 1.0 if s[i] == s[j] else 0.0
            p = sum(1.0 for g in gs if g[i] == g[j]) / len(gs)
            total += c * p + (1 - c) * (1 - p)
            count += 1
    return total / count


def brute_voi(seg, g, base=math.e):
    a = np.asarray(seg).ravel().tolist()
    b = np.asarray(g).ravel().tolist()
    n = len(a)
    pa = Counter(a)
    pb = Counter(b)
    pab = Counter(zip(a, b))
    ha = -sum(c / n * math.log(c / n, base) for c in pa.values())
    hb = -sum(c / n * math.log(c / n, base) for c in pb.values())
    mi = sum(c / n * math.log((c / n) / ((pa[x] / n) * (pb[y] / n)), base) for (x, y), c in pab.items())
    return ha + hb - 2 * mi


def brute_gce(seg, g):
    a = np.asarray(seg).ravel()
    b = np.asarray(g).ravel()
    n = a.size
    e12 = e21 = 0.0
    for p in range(n):
        ra = set(np.flatnonzero(a == a[p]).tolist())
        rb = set(np.flatnonzero(b == b[p]).tolist())
        e12 += len(ra - rb) / len(ra)
        e21 += len(rb - ra) / len(rb)
    return min(e12, e21) / n


def brute_boundary(labels):
    """Pixels whose right or lower neighbour carries a different label; border if none."""
    h, w = labels.shape
    pts = []
    for r in range(h):
        for c in range(w):
            if (c + 1 < w and labels[r, c] != labels[r, c + 1]) or (r + 1 < h and labels[r, c] != labels[r + 1, c]):
                pts.append((r, c))
    if not pts:
        pts = [(r, c) for r in range(h) for c in range(w) if r in (0, h - 1) or c in (0, w - 1)]
    return pts


def brute_bde(seg, g):
    bs = brute_boundary(np.asarray(seg))
    bg = brute_boundary(np.asarray(g))

    def mean_nearest(src, dst):
        return sum(min(math.hypot(p[0] - q[0], p[1] - q[1]) for q in dst) for p in src) / len(src)

    return (mean_nearest(bs, bg) + mean_nearest(bg, bs)) / 2


# -- superpixels ----------------------------------------------------------------


def brute_fh(lab, k, min_size):
    """Graph-based segmentation on an already smoothed (H, W, C) array.

    Returns a label array where pixels share a label iff they share a component.
    """
    h, w, _ = lab.shape
    edges = []
    for r in range(h):
        for c in range(w):
            a = r * w + c
            for dr, dc in ((0, 1), (1, 0), (1, 1), (1, -1)):
                rr, cc = r + dr, c + dc
                if 0 <= rr < h and 0 <= cc < w:
                    b = rr * w + cc
                    wt = float(np.sqrt(np.sum((lab[r, c] - lab[rr, cc]) ** 2)))
                    edges.append((wt, min(a, b), max(a, b)))
    edges.sort()
    comp = {i: i for i in range(h * w)}
    members = {i: [i] for i in range(h * w)}
    internal = {i: 0.0 for i in range(h * w)}
    for wt, a, b in edges:
        ca, cb = comp[a], comp[b]
        if ca == cb:
            continue
        ta = internal[ca] + k / len(members[ca])
        tb = internal[cb] + k / len(members[cb])
        if wt <= min(ta, tb):
            for p in members[cb]:
                comp[p] = ca
            members[ca] += members.pop(cb)
            internal[ca] = max(internal[ca], internal.pop(cb), wt)
    for wt, a, b in edges:
        ca, cb = comp[a], comp[b]
        if ca != cb and (len(members[ca]) < min_size or len(members[cb]) < min_size):
            for p in members[cb]:
                comp[p] = ca
            members[ca] += members.pop(cb)
    return np.array([comp[i] for i in range(h * w)]).reshape(h, w)


def same_partition(a, b) -> bool:
    """True iff two label arrays induce the same co-membership relation."""
    a = np.asarray(a).ravel()
    b = np.asarray(b).ravel()
    fwd, bwd = {}, {}
    for x, y in zip(a.tolist(), b.tolist()):
        if fwd.setdefault(x, y) != y or bwd.setdefault(y, x) != x:
            return False
    return True


# -- sparse coding --------------------------------------------------------------


def best_subset_fit(X, y, max_size):
    """Exhaustive minimum-residual least squares over all supports up to max_size."""
    best = (np.linalg.norm(y), (), np.zeros(0))
    for size in range(1, max_size + 1):
        for sup in itertools.combinations(range(X.shape[1]), size):
            c, *_ = np.linalg.lstsq(X[:, sup], y, rcond=None)
            res = np.linalg.norm(y - X[:, sup] @ c)
            if res < best[0] - 1e-12:
                best = (res, sup, c)
    return best


# -- graphs ---------------------------------------------------------------------


def full_graph_spectrum(B, k):
    """Smallest generalized eigenpairs of (D - W) f = gamma D f on the whole bipartite graph."""
    B = np.asarray(B, dtype=np.float64)
    nx, ny = B.shape
    W = np.zeros((nx + ny, nx + ny))
    W[:nx, nx:] = B
    W[nx:, :nx] = B.T
    d = W.sum(axis=1)
    gamma, vecs = linalg.eigh(np.diag(d) - W, np.diag(d), subset_by_index=[0, k - 1])
    return gamma, vecs


def best_permutation_accuracy(pred, truth):
    """Fraction of points correct under the best one-to-one label matching."""
    _, p = np.unique(np.asarray(pred), return_inverse=True)
    _, t = np.unique(np.asarray(truth), return_inverse=True)
    table = np.zeros((p.max() + 1, t.max() + 1))
    np.add.at(table, (p.ravel(), t.ravel()), 1)
    rows, cols = linear_sum_assignment(-table)
    return table[rows, cols].sum() / p.size


# -- low-rank representation ----------------------------------------------------


def lrr_cost_and_grad(x, F, d, lam1, lam2):
    n, N = F.shape
    D = x[: n * d].reshape(n, d)
    U = x[n * d : n * d + N * d].reshape(N, d)
    V = x[n * d + N * d :].reshape(N, d)
    R1 = F - D @ V.T
    R2 = D - F @ U
    cost = lam1 / 2 * np.sum(R1**2) + 0.5 * (np.sum(U**2) + np.sum(V**2)) + lam2 / 2 * np.sum(R2**2)
    gD = -lam1 * R1 @ V + lam2 * R2
    gU = U - lam2 * F.T @ R2
    gV = V - lam1 * R1.T @ D
    return cost, np.concatenate([gD.ravel(), gU.ravel(), gV.ravel()])


def batch_lrr(F, d, lam1, lam2, seeds=(0, 1, 2), am_iters=200):
    """Batch minimiser of the factorized LRR cost.

    Alternating exact block minimisation followed by an L-BFGS polish
    with the analytic gradient; best of several random starts.
    """
    n, N = F.shape
    best = None
    for s in seeds:
        rng = np.random.default_rng(s)
        D = rng.standard_normal((n, d)) / np.sqrt(n)
        for _ in range(am_iters):
            V = lam1 * np.linalg.solve(lam1 * D.T @ D + np.eye(d), D.T @ F).T
            U = lam2 * F.T @ np.linalg.solve(lam2 * F @ F.T + np.eye(n), D)
            D = np.linalg.solve(lam1 * V.T @ V + lam2 * np.eye(d), (lam1 * F @ V + lam2 * F @ U).T).T
        x0 = np.concatenate([D.ravel(), U.ravel(), V.ravel()])
        res = minimize(
            lrr_cost_and_grad,
            x0,
            args=(F, d, lam1, lam2),
            jac=True,
            method="L-BFGS-B",
            options=dict(maxiter=20000, gtol=1e-10, ftol=1e-15),
        )
        if best is None or res.fun < best.fun:
            best = res
    return float(best.fun)
