import numpy as np
import pytest
import scipy.io
import scipy.sparse as sp

from robin_fsi.linalg import (
    DirectSolver,
    SingularMatrixError,
    csr_from_triplets,
    export_matrix_market,
    minres_solve,
    solve,
)


def random_spd(n, rng):
    A = rng.standard_normal((n, n))
    return A @ A.T + n * np.eye(n)


def test_csr_from_triplets_sums_duplicates():
    A = csr_from_triplets([0, 0, 1], [0, 0, 1], [1.0, 2.0, 5.0], (2, 2))
    assert A[0, 0] == 3.0
    assert A[1, 1] == 5.0
    assert A.nnz == 2


def test_direct_solver_matches_dense_elimination():
    rng = np.random.default_rng(7)
    A = random_spd(40, rng)
    b = rng.standard_normal(40)
    x = DirectSolver(sp.csr_matrix(A)).solve(b)
    assert np.allclose(x, np.linalg.solve(A, b), atol=1e-10, rtol=1e-10)


def test_direct_solver_saddle_point():
    rng = np.random.default_rng(3)
    K = random_spd(10, rng)
    B = rng.standard_normal((4, 10))
    A = np.block([[K, B.T], [B, np.zeros((4, 4))]])
    b = rng.standard_normal(14)
    x = DirectSolver(sp.csr_matrix(A)).solve(b)
    assert np.linalg.norm(A @ x - b) <= 1e-10 * np.linalg.norm(b)


def test_direct_solver_reuse_many_rhs():
    rng = np.random.default_rng(5)
    A = random_spd(20, rng)
    solver = DirectSolver(sp.csr_matrix(A))
    for _ in range(5):
        b = rng.standard_normal(20)
        assert np.allclose(solver.solve(b), np.linalg.solve(A, b), atol=1e-9)


def test_singular_matrix_raises():
    A = sp.csr_matrix(np.array([[1.0, 2.0], [2.0, 4.0]]))
    with pytest.raises(SingularMatrixError):
        DirectSolver(A).solve(np.array([1.0, 0.0]))


def test_minres_symmetric_indefinite():
    rng = np.random.default_rng(11)
    K = random_spd(12, rng)
    B = rng.standard_normal((5, 12))
    A = np.block([[K, B.T], [B, np.zeros((5, 5))]])
    b = rng.standard_normal(17)
    x = minres_solve(sp.csr_matrix(A), b, rtol=1e-9)
    assert np.linalg.norm(A @ x - b) <= 1e-9 * np.linalg.norm(b)


def test_solve_self_adjointness_probe():
    rng = np.random.default_rng(13)
    A = random_spd(15, rng)
    As = sp.csr_matrix(A)
    b, c = rng.standard_normal((2, 15))
    lhs = solve(As, b) @ c
    rhs = b @ solve(As, c)
    assert lhs == pytest.approx(rhs, rel=1e-10)


def test_export_matrix_market_roundtrip(tmp_path):
    rng = np.random.default_rng(17)
    A = sp.random(8, 8, density=0.3, random_state=1).tocsr()
    path = tmp_path / "mat.mtx"
    export_matrix_market(A, path)
    B = scipy.io.mmread(str(path)).tocsr()
    assert np.allclose(A.toarray(), B.toarray())
