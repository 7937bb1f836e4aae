import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from curlamr.linalg import (BreakdownError, ConvergenceError,
                            SingularSystemError, SolveConfig, SparseSymMatrix,
                            dense_saddle_solve, pcg)


def _dense_to_csr(A):
    rows, cols = np.nonzero(A)
    return SparseSymMatrix.from_coo(A.shape[0], rows, cols, A[rows, cols])


def _random_spd(n, rng):
    M = rng.standard_normal((n, n))
    return M @ M.T + n * np.eye(n)


def test_pcg_identity_one_iteration():
    A = _dense_to_csr(np.eye(4))
    b = np.array([1.0, -2.0, 3.0, 0.5])
    x, iters, res = pcg(A, b, SolveConfig(preconditioner="none"))
    assert iters == 1
    assert np.abs(x - b).max() < 1e-14


def test_pcg_diagonal():
    A = _dense_to_csr(np.diag([1.0, 2.0, 3.0]))
    x, iters, res = pcg(A, np.array([1.0, 2.0, 3.0]))
    assert np.abs(x - 1.0).max() < 1e-12


@pytest.mark.parametrize("precond", ["none", "jacobi", "sgs"])
def test_pcg_vs_dense_lu(precond):
    rng = np.random.default_rng(12)
    A = _random_spd(50, rng)
    b = rng.standard_normal(50)
    x_lu = np.linalg.solve(A, b)
    x, iters, res = pcg(_dense_to_csr(A), b,
                        SolveConfig(tol=1e-12, preconditioner=precond))
    assert np.abs(x - x_lu).max() < 1e-9 * np.abs(x_lu).max()
    assert res <= 1e-12


def test_pcg_zero_rhs():
    A = _dense_to_csr(np.eye(3))
    x, iters, res = pcg(A, np.zeros(3))
    assert iters == 0 and np.all(x == 0)


def test_pcg_breakdown_on_indefinite():
    A = _dense_to_csr(np.array([[1.0, 0.0], [0.0, -1.0]]))
    with pytest.raises(BreakdownError):
        pcg(A, np.array([0.0, 1.0]), SolveConfig(preconditioner="none"))


def test_pcg_max_iterations_error():
    rng = np.random.default_rng(4)
    A = _random_spd(40, rng)
    with pytest.raises(ConvergenceError):
        pcg(_dense_to_csr(A), rng.standard_normal(40),
            SolveConfig(tol=1e-14, max_iterations=3, preconditioner="none"))


def test_pcg_inexact_fixed_iterations():
    rng = np.random.default_rng(5)
    A = _random_spd(40, rng)
    b = rng.standard_normal(40)
    S = _dense_to_csr(A)
    x, iters, res = pcg(S, b, SolveConfig(mode="inexact", iterations=5))
    assert iters == 5
    assert res > 0

    # A-norm error is monotone nonincreasing in the iteration count
    x_star = np.linalg.solve(A, b)
    errs = []
    for k in range(1, 12):
        xk, _, _ = pcg(S, b, SolveConfig(mode="inexact", iterations=k))
        d = xk - x_star
        errs.append(np.sqrt(d @ A @ d))
    assert all(errs[i + 1] <= errs[i] * (1 + 1e-12) for i in range(len(errs) - 1))


def test_solve_config_validation():
    with pytest.raises(ValueError):
        SolveConfig(tol=2.0)
    with pytest.raises(ValueError):
        SolveConfig(mode="sometimes")
    with pytest.raises(ValueError):
        SolveConfig(preconditioner="ilu")
    with pytest.raises(ValueError):
        SolveConfig(iterations=0)


def test_sparse_roundtrip_and_duplicates():
    # duplicate COO entries are summed
    S = SparseSymMatrix.from_coo(3, [0, 0, 1, 2, 0], [0, 1, 1, 2, 1],
                                 [1.0, 2.0, 3.0, 4.0, 0.5])
    A = S.toarray()
    assert A[0, 1] == 2.5
    assert A[0, 0] == 1.0
    x = np.array([1.0, 1.0, 1.0])
    assert np.allclose(S.matvec(x), A @ x)


def test_submatrix():
    rng = np.random.default_rng(9)
    A = _random_spd(8, rng)
    S = _dense_to_csr(A)
    mask = np.array([True, False, True, True, False, True, False, True])
    sub = S.submatrix(mask)
    assert np.allclose(sub.toarray(), A[np.ix_(mask, mask)])


def test_dense_saddle_trivial_zero():
    x, y = dense_saddle_solve(np.eye(2), np.array([[1.0, 0.0]]),
                              np.zeros(2), np.zeros(1))
    assert np.abs(x).max() == 0 and np.abs(y).max() == 0


def test_dense_saddle_hand_solved():
    x, y = dense_saddle_solve(np.eye(2), np.array([[1.0, 0.0]]),
                              np.array([1.0, 1.0]), np.array([0.0]))
    assert np.allclose(x, [0.0, 1.0])
    assert np.allclose(y, [1.0])


def test_dense_saddle_random_vs_generic_solver():
    rng = np.random.default_rng(21)
    A = _random_spd(30, rng)
    B = rng.standard_normal((10, 30))
    f1 = rng.standard_normal(30)
    f2 = rng.standard_normal(10)
    K = np.zeros((40, 40))
    K[:30, :30] = A
    K[:30, 30:] = B.T
    K[30:, :30] = B
    ref = np.linalg.solve(K, np.concatenate([f1, f2]))
    x, y = dense_saddle_solve(A, B, f1, f2)
    sol = np.concatenate([x, y])
    assert np.abs(sol - ref).max() < 1e-10 * np.abs(ref).max()


def test_dense_saddle_singular_rejected():
    A = np.eye(2)
    B = np.array([[1.0, 0.0], [1.0, 0.0]])  # rank deficient
    with pytest.raises(SingularSystemError):
        dense_saddle_solve(A, B, np.zeros(2), np.array([0.0, 1.0]))


@settings(max_examples=25, deadline=None)
@given(st.integers(min_value=1, max_value=12), st.integers(min_value=0, max_value=10 ** 6))
def test_pcg_property_small_spd(n, seed):
    rng = np.random.default_rng(seed)
    A = _random_spd(n, rng)
    b = rng.standard_normal(n)
    x, iters, res = pcg(_dense_to_csr(A), b, SolveConfig(tol=1e-11))
    assert np.linalg.norm(b - A @ x) <= 1e-10 * max(np.linalg.norm(b), 1e-300)
