"""Sparse matrices, saddle-point composition, and direct factorization.

Matrices are scipy CSR throughout (canonical form: sorted, duplicate-free
column indices per row).  Factorization goes through UMFPACK (via cvxopt)
with a SuperLU fallback; both are deterministic serial codes.  Every solve
is verified against the residual contract and refined once if needed.
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

try:
    from cvxopt import matrix as _cvx_matrix, spmatrix as _cvx_spmatrix
    import cvxopt.umfpack as _umfpack
    _HAVE_UMFPACK = True
except ImportError:  # pragma: no cover - cvxopt is a declared dependency
    _HAVE_UMFPACK = False

import scipy.sparse.linalg as spla

RESIDUAL_TOL = 1e-10


class LinearSolverError(RuntimeError):
    """Structural or numerical singularity, or an unmet residual tolerance."""


def _as_csr(M) -> sp.csr_matrix:
    out = sp.csr_matrix(M)
    out.sum_duplicates()
    out.sort_indices()
    return out


def matvec(M, x: np.ndarray) -> np.ndarray:
    """Sparse matrix-vector product with an explicit dimension check."""
    M = sp.csr_matrix(M)
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.shape[0] != M.shape[1]:
        raise ValueError(
            f"dimension mismatch: matrix is {M.shape}, vector has shape {x.shape}"
        )
    return M @ x


def add_scaled(M1, c1: float, M2, c2: float) -> sp.csr_matrix:
    """c1*M1 + c2*M2 on the union sparsity pattern."""
    M1, M2 = sp.csr_matrix(M1), sp.csr_matrix(M2)
    if M1.shape != M2.shape:
        raise ValueError(f"shape mismatch: {M1.shape} vs {M2.shape}")
    return _as_csr(c1 * M1 + c2 * M2)


@dataclass
class SaddleSystem:
    """Velocity/pressure block system with Dirichlet and mean-pressure handling.

    The assembled matrix is
        [ A_vv   -B^T ] [u]   [rhs_v]
        [ B        0  ] [p] = [rhs_p]
    with boundary velocity rows replaced by identity rows (zero right-hand
    side) and the constant-pressure null space removed either by pinning
    one pressure dof (default, fast) or by a border row/column enforcing
    the weighted-mean constraint (kept for reference; a dense border row
    roughly decuples direct-factorization fill on these grids).
    """

    A_vv: sp.csr_matrix
    B: sp.csr_matrix
    rhs_v: np.ndarray
    rhs_p: np.ndarray = None
    pressure_weights: np.ndarray = None   # integral of each pressure basis fn
    dirichlet_dofs: np.ndarray = None
    constraint: str = "pin"               # "pin" | "border" | "none"

    def __post_init__(self):
        self.A_vv = _as_csr(self.A_vv)
        self.B = _as_csr(self.B)
        nv = self.A_vv.shape[0]
        npres = self.B.shape[0]
        if self.A_vv.shape[1] != nv or self.B.shape[1] != nv:
            raise ValueError("block shapes are inconsistent")
        if self.rhs_p is None:
            self.rhs_p = np.zeros(npres)
        if self.dirichlet_dofs is None:
            self.dirichlet_dofs = np.array([], dtype=np.int64)
        if self.constraint not in ("pin", "border", "none"):
            raise ValueError(f"unknown pressure constraint {self.constraint!r}")
        if self.constraint == "border" and self.pressure_weights is None:
            raise ValueError("border constraint needs pressure weights")

    def assemble(self) -> tuple[sp.csc_matrix, np.ndarray]:
        """Square matrix and right-hand side ready for factorization."""
        nv = self.A_vv.shape[0]
        npres = self.B.shape[0]
        blocks = [[self.A_vv, -self.B.T], [self.B, None]]
        rhs = [self.rhs_v, self.rhs_p]
        if self.constraint == "border":
            w = sp.csr_matrix(self.pressure_weights.reshape(-1, 1))
            blocks[0].append(None)
            blocks[1].append(w)
            blocks.append([None, w.T, None])
            rhs.append(np.zeros(1))
        S = sp.bmat(blocks, format="csr")
        b = np.concatenate(rhs)

        fixed = np.asarray(self.dirichlet_dofs, dtype=np.int64)
        if self.constraint == "pin":
            fixed = np.concatenate([fixed, [nv]])  # first pressure dof
        if fixed.size:
            keep = np.ones(S.shape[0])
            keep[fixed] = 0.0
            S = sp.diags(keep) @ S + sp.diags(1.0 - keep)
            b = b * keep
        return S.tocsc(), b


class Factorization:
    """Direct LU factorization of a square sparse matrix.

    Solves verify the relative residual against RESIDUAL_TOL, applying one
    step of iterative refinement first if needed.  Instances are immutable
    after construction and safe for concurrent solves.
    """

    def __init__(self, A, _symbolic=None):
        A = sp.csc_matrix(A)
        if A.shape[0] != A.shape[1]:
            raise ValueError(f"matrix must be square, got {A.shape}")
        self._A = A
        if _symbolic is None:  # pattern seen for the first time
            empty_rows = np.flatnonzero(np.diff(sp.csr_matrix(A).indptr) == 0)
            if empty_rows.size:
                raise LinearSolverError(
                    f"structurally singular: row {empty_rows[0]} has no entries"
                )
        if _HAVE_UMFPACK:
            coo = A.tocoo()
            self._cvx = _cvx_spmatrix(
                coo.data, coo.row.astype(int), coo.col.astype(int), A.shape
            )
            try:
                self._symbolic = _symbolic if _symbolic is not None \
                    else _umfpack.symbolic(self._cvx)
                self._numeric = _umfpack.numeric(self._cvx, self._symbolic)
            except ArithmeticError as exc:
                raise LinearSolverError(
                    f"numerical singularity during factorization: {exc}"
                ) from exc
            self._backend = "umfpack"
        else:  # pragma: no cover - exercised only without cvxopt
            try:
                self._lu = spla.splu(A)
            except RuntimeError as exc:
                raise LinearSolverError(str(exc)) from exc
            self._symbolic = None
            self._backend = "superlu"

    @property
    def symbolic(self):
        """Backend symbolic analysis, reusable across identical patterns."""
        return self._symbolic if self._backend == "umfpack" else None

    def _raw_solve(self, b: np.ndarray) -> np.ndarray:
        if self._backend == "umfpack":
            rhs = _cvx_matrix(b)
            try:
                _umfpack.solve(self._cvx, self._numeric, rhs)
            except ArithmeticError as exc:
                raise LinearSolverError(f"singular system in solve: {exc}") from exc
            return np.array(rhs).ravel()
        return self._lu.solve(b)  # pragma: no cover

    def solve(self, b: np.ndarray) -> np.ndarray:
        b = np.asarray(b, dtype=float)
        if b.shape != (self._A.shape[0],):
            raise ValueError(
                f"rhs shape {b.shape} does not match system size {self._A.shape[0]}"
            )
        x = self._raw_solve(b)
        bnorm = np.linalg.norm(b)
        if bnorm == 0.0:
            return np.zeros_like(b)
        for _ in range(2):
            resid = b - self._A @ x
            if np.linalg.norm(resid) <= RESIDUAL_TOL * bnorm:
                return x
            x = x + self._raw_solve(resid)
        resid = np.linalg.norm(b - self._A @ x) / bnorm
        if resid > RESIDUAL_TOL:
            raise LinearSolverError(
                f"solve residual {resid:.2e} exceeds {RESIDUAL_TOL:.0e} "
                "after refinement"
            )
        return x


def factorize(system, _symbolic=None) -> Factorization:
    """Factorize a SaddleSystem or any square sparse matrix."""
    if isinstance(system, SaddleSystem):
        S, _ = system.assemble()
        return Factorization(S, _symbolic)
    return Factorization(system, _symbolic)


def solve(factorization: Factorization, rhs: np.ndarray) -> np.ndarray:
    return factorization.solve(rhs)
