import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy import sparse

from afagraph.subspace import OMPTrace, omp_column, spr_matrix, symmetrize, write_coo
from oracles import best_subset_fit


def union_of_subspaces(rng, n_sub, dim, ambient, per):
    basis = np.linalg.qr(rng.standard_normal((ambient, ambient)))[0]
    cols, truth = [], []
    for s in range(n_sub):
        B = basis[:, s * dim : (s + 1) * dim]
        cols.append(B @ rng.standard_normal((dim, per)))
        truth += [s] * per
    return np.hstack(cols), np.array(truth)


def test_orthonormal_exact_hit():
    X = np.eye(5)
    c = omp_column(X, X[:, 3])
    assert np.flatnonzero(c).tolist() == [3]
    assert c[3] == pytest.approx(1.0)


def test_zero_target():
    assert not omp_column(np.eye(3), np.zeros(3)).any()


def test_two_of_three_matches_exhaustive_search():
    X = np.array([[1.0, 0.0, 1 / np.sqrt(2)], [0.0, 1.0, 1 / np.sqrt(2)]])
    y = np.array([2.0, 1.0])
    c = omp_column(X, y, psi=2)
    res = np.linalg.norm(y - X @ c)
    best_res, _, _ = best_subset_fit(X, y, 2)
    assert res == pytest.approx(best_res, abs=1e-12)


def test_tie_goes_to_lowest_index():
    X = np.array([[1.0, 1.0], [0.0, 0.0]])
    c = omp_column(X, np.array([1.0, 0.0]), psi=1)
    assert np.flatnonzero(c).tolist() == [0]


scaled = st.integers(-50, 50).map(lambda v: v / 10)


@given(
    arrays(np.float64, (6, 9), elements=scaled),
    arrays(np.float64, 6, elements=scaled),
    st.integers(1, 5),
)
def test_residual_orthogonal_and_non_increasing(X, y, psi):
    tr = OMPTrace()
    c = omp_column(X, y, psi=psi, trace=tr)
    assert np.count_nonzero(c) <= psi
    assert all(b <= a + 1e-9 * max(1.0, a) for a, b in zip(tr.residual_norms, tr.residual_norms[1:]))
    assert all(o <= 1e-9 for o in tr.orthogonality)


def test_spr_identical_pair():
    C = spr_matrix(np.array([[1.0, 1.0], [2.0, 2.0]])).C_star.toarray()
    np.testing.assert_allclose(C, [[0.0, 1.0], [1.0, 0.0]])


def test_spr_orthogonal_lines(rng):
    F, truth = union_of_subspaces(rng, 3, 1, 3, 5)
    C = spr_matrix(F).C_star.tocoo()
    assert C.nnz > 0
    assert np.all(truth[C.row] == truth[C.col])


@given(st.integers(0, 2**31 - 1))
def test_spr_structure(seed):
    F = np.random.default_rng(seed).normal(size=(3, 12))
    S = spr_matrix(F, psi=3)
    C = S.C_star.toarray()
    assert np.all(np.diag(C) == 0)
    assert np.all((C != 0).sum(axis=0) <= 3)
    assert np.all(np.isfinite(C))


def test_symmetrize():
    assert not symmetrize(np.zeros((3, 3))).any()
    C = np.zeros((3, 3))
    C[1, 2] = -2.0
    M = symmetrize(sparse.csc_matrix(C))
    assert M[1, 2] == M[2, 1] == 2.0
    R = sparse.random(8, 8, density=0.3, random_state=0)
    M = symmetrize(R)
    assert np.array_equal(M, M.T)


def test_coo_dump(tmp_path):
    write_coo(np.array([[0.0, 1.5], [0.0, 0.0]]), tmp_path / "c.txt")
    assert (tmp_path / "c.txt").read_text().split() == ["0", "1", "1.5"]
