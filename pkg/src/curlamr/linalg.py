"""Sparse symmetric CSR storage with preconditioned CG, and the dense
saddle-point solver used by the vertex-patch recovery."""

from dataclasses import dataclass

import numpy as np

from .backend import kernels


class ConvergenceError(RuntimeError):
    """EXACT-mode PCG failed to reach its tolerance within max iterations."""


class BreakdownError(RuntimeError):
    """CG met non-positive curvature; the operator is not SPD."""


class SingularSystemError(RuntimeError):
    """A dense saddle factorization was singular to working precision."""


@dataclass
class SparseSymMatrix:
    """Compressed sparse rows of a structurally symmetric matrix."""

    indptr: np.ndarray
    indices: np.ndarray
    data: np.ndarray
    n: int

    @classmethod
    def from_coo(cls, n, rows, cols, vals):
        """Build canonical CSR, summing duplicate entries."""
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        vals = np.asarray(vals, dtype=np.float64)
        keys = rows * n + cols
        order = np.argsort(keys, kind="stable")
        keys = keys[order]
        vals = vals[order]
        uniq, start = np.unique(keys, return_index=True)
        summed = np.add.reduceat(vals, start)
        r = uniq // n
        c = uniq % n
        indptr = np.searchsorted(r, np.arange(n + 1))
        return cls(indptr.astype(np.int64), c.astype(np.int64), summed, n)

    def matvec(self, x):
        return kernels.csr_matvec(self.indptr, self.indices, self.data, x)

    def __matmul__(self, x):
        return self.matvec(x)

    def diagonal(self):
        d = np.zeros(self.n)
        rows = np.repeat(np.arange(self.n), np.diff(self.indptr))
        hit = rows == self.indices
        d[rows[hit]] = self.data[hit]
        return d

    def submatrix(self, mask):
        """Symmetric restriction to the True rows/cols of mask."""
        mask = np.asarray(mask, dtype=bool)
        newid = np.cumsum(mask) - 1
        rows = np.repeat(np.arange(self.n), np.diff(self.indptr))
        keep = mask[rows] & mask[self.indices]
        return SparseSymMatrix.from_coo(int(mask.sum()), newid[rows[keep]],
                                        newid[self.indices[keep]], self.data[keep])

    def toarray(self):
        A = np.zeros((self.n, self.n))
        rows = np.repeat(np.arange(self.n), np.diff(self.indptr))
        A[rows, self.indices] = self.data
        return A

    def symmetry_defect(self):
        """Relative max |A - A^T|; cheap enough for assembled systems."""
        rows = np.repeat(np.arange(self.n), np.diff(self.indptr))
        keys = rows * self.n + self.indices
        tkeys = self.indices * self.n + rows
        order = np.argsort(keys)
        torder = np.argsort(tkeys)
        if not np.array_equal(keys[order], tkeys[torder]):
            return np.inf
        scale = np.abs(self.data).max(initial=0.0)
        if scale == 0.0:
            return 0.0
        return np.abs(self.data[order] - self.data[torder]).max() / scale


@dataclass
class SolveConfig:
    """PCG settings.  EXACT mode iterates to a relative-residual tolerance;
    INEXACT mode returns the iterate after a fixed number of steps, which
    emulates recovering the auxiliary field with a few smoother sweeps."""

    mode: str = "exact"            # "exact" | "inexact"
    tol: float = 1e-10
    max_iterations: int = 50000
    iterations: int = 10           # INEXACT step count
    preconditioner: str = "jacobi"  # "none" | "jacobi" | "sgs"

    def __post_init__(self):
        self.mode = self.mode.lower()
        self.preconditioner = self.preconditioner.lower()
        if self.mode not in ("exact", "inexact"):
            raise ValueError(f"unknown solve mode {self.mode!r}")
        if self.preconditioner not in ("none", "jacobi", "sgs"):
            raise ValueError(f"unknown preconditioner {self.preconditioner!r}")
        if not (0.0 < self.tol < 1.0):
            raise ValueError("tol must lie in (0, 1)")
        if self.max_iterations < 1 or self.iterations < 1:
            raise ValueError("iteration counts must be >= 1")


def _make_preconditioner(A, kind):
    if kind == "none":
        return lambda r: r
    diag = A.diagonal()
    if np.any(diag <= 0):
        raise BreakdownError("non-positive diagonal entry; matrix not SPD")
    if kind == "jacobi":
        inv = 1.0 / diag
        return lambda r: inv * r
    return lambda r: kernels.sgs_apply(A.indptr, A.indices, A.data, diag, r)


def pcg(A, b, config=None, x0=None):
    """Preconditioned conjugate gradients for SPD systems.

    Returns (x, iterations, final relative residual).
    """
    config = config or SolveConfig()
    b = np.asarray(b, dtype=np.float64)
    n = b.shape[0]
    normb = np.linalg.norm(b)
    if normb == 0.0:
        return np.zeros(n), 0, 0.0

    apply_M = _make_preconditioner(A, config.preconditioner)
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=np.float64)
    r = b - A.matvec(x) if x0 is not None else b.copy()
    z = apply_M(r)
    p = z.copy()
    rz = float(r @ z)
    fixed = config.mode == "inexact"
    maxit = config.iterations if fixed else config.max_iterations
    relres = np.linalg.norm(r) / normb
    it = 0
    while it < maxit:
        if not fixed and relres <= config.tol:
            return x, it, relres
        Ap = A.matvec(p)
        pAp = float(p @ Ap)
        if pAp <= 0.0:
            raise BreakdownError("non-positive curvature encountered in CG")
        alpha = rz / pAp
        x += alpha * p
        r -= alpha * Ap
        it += 1
        relres = np.linalg.norm(r) / normb
        z = apply_M(r)
        rz_new = float(r @ z)
        p = z + (rz_new / rz) * p
        rz = rz_new
    if fixed:
        return x, it, relres
    if relres <= config.tol:
        return x, it, relres
    raise ConvergenceError(
        f"PCG did not reach tol {config.tol:g} in {maxit} iterations "
        f"(relative residual {relres:.3e})")


def dense_saddle_solve(A, B, f1, f2):
    """Solve the saddle block system [[A, B^T], [B, 0]] [x; y] = [f1; f2].

    A must be symmetric positive definite on the primal block and B must
    have full row rank; the factorization is LAPACK LU with partial
    pivoting and the solution is verified against the assembled residual.
    """
    A = np.asarray(A, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64).reshape(-1, A.shape[0])
    n = A.shape[0]
    m = B.shape[0]
    K = np.zeros((n + m, n + m))
    K[:n, :n] = A
    if m:
        K[:n, n:] = B.T
        K[n:, :n] = B
    rhs = np.concatenate([np.asarray(f1, dtype=np.float64),
                          np.asarray(f2, dtype=np.float64)])
    try:
        sol = np.linalg.solve(K, rhs)
    except np.linalg.LinAlgError as exc:
        raise SingularSystemError(str(exc)) from exc
    resid = np.linalg.norm(K @ sol - rhs)
    scale = np.linalg.norm(rhs) + np.linalg.norm(K, ord="fro") * np.linalg.norm(sol)
    if scale > 0 and resid > 1e-10 * scale:
        raise SingularSystemError(
            f"saddle solve residual {resid:.3e} exceeds 1e-10 relative")
    return sol[:n], sol[n:]
