"""Thin sparse linear-algebra layer: CSR construction, a cached direct
factorization with a residual accuracy contract, and an iterative
fallback for symmetric indefinite systems."""

import threading

import numpy as np
import scipy.io
import scipy.sparse as sp
import scipy.sparse.linalg as spla

RESIDUAL_RTOL = 1e-10


class SingularMatrixError(RuntimeError):
    """The factorization failed or produced a non-finite solution."""


class NoConvergenceError(RuntimeError):
    """The iterative solver did not meet the residual contract."""


def csr_from_triplets(rows, cols, vals, shape):
    """CSR matrix from COO triplets; duplicate entries are summed."""
    mat = sp.coo_matrix((vals, (rows, cols)), shape=shape).tocsr()
    mat.sum_duplicates()
    mat.sort_indices()
    return mat


class DirectSolver:
    """Sparse LU factorization computed once and reused across solves.

    ``solve`` enforces ||A x - b|| <= 1e-10 ||b|| and raises
    SingularMatrixError otherwise; a lock makes reuse thread-safe.
    """

    def __init__(self, matrix):
        self.matrix = sp.csc_matrix(matrix)
        if self.matrix.shape[0] != self.matrix.shape[1]:
            raise ValueError("direct solver needs a square matrix")
        try:
            self._lu = spla.splu(self.matrix)
        except RuntimeError as exc:
            raise SingularMatrixError(str(exc)) from exc
        self._lock = threading.Lock()

    def solve(self, rhs):
        rhs = np.asarray(rhs, dtype=float)
        with self._lock:
            x = self._lu.solve(rhs)
        if not np.all(np.isfinite(x)):
            raise SingularMatrixError("factorization produced non-finite values")
        bnorm = np.linalg.norm(rhs)
        res = np.linalg.norm(self.matrix @ x - rhs)
        if res > RESIDUAL_RTOL * max(bnorm, 1e-300):
            raise SingularMatrixError(
                f"direct solve residual {res:.3e} exceeds {RESIDUAL_RTOL:.0e} * ||b||"
            )
        return x


def solve(matrix, rhs, *, symmetric=True, rtol=RESIDUAL_RTOL, maxiter=None):
    """One-shot solve: direct first, MINRES fallback for symmetric systems."""
    try:
        return DirectSolver(matrix).solve(np.asarray(rhs, dtype=float))
    except SingularMatrixError:
        if not symmetric:
            raise
    return minres_solve(matrix, rhs, rtol=rtol, maxiter=maxiter)


def minres_solve(matrix, rhs, *, rtol=RESIDUAL_RTOL, maxiter=None):
    """MINRES with symmetric diagonal scaling for symmetric (possibly
    indefinite) systems; enforces the same residual contract."""
    A = sp.csr_matrix(matrix)
    b = np.asarray(rhs, dtype=float)
    d = np.abs(A.diagonal())
    d[d < 1e-300] = 1.0
    s = 1.0 / np.sqrt(d)
    S = sp.diags(s)
    As = (S @ A @ S).tocsr()
    bs = s * b
    n = A.shape[0]
    maxiter = maxiter or max(10 * n, 1000)
    xs, info = spla.minres(As, bs, rtol=1e-14, maxiter=maxiter)
    x = s * xs
    res = np.linalg.norm(A @ x - b)
    if info != 0 or res > rtol * max(np.linalg.norm(b), 1e-300):
        raise NoConvergenceError(
            f"minres residual {res:.3e} did not meet {rtol:.0e} * ||b||"
        )
    return x


def export_matrix_market(matrix, path):
    """Write a sparse matrix in Matrix Market coordinate format."""
    scipy.io.mmwrite(str(path), sp.coo_matrix(matrix))
