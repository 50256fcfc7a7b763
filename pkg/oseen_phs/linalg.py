from typing import Optional

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.sparse.csgraph import reverse_cuthill_mckee

from oseen_phs.const import DEFAULT_TOL, SOLVE_DONE
from oseen_phs.utils.errors import ConvergenceError, DimensionError, SingularSystemError, get_exception_msg
from oseen_phs.utils.logger import logger
from oseen_phs.type import SaddleSystem, SolveResult, SolverBackend, SparseMatrix


REFINEMENT_STEPS = 3
GMRES_MAX_ITER = 2000


def spmv(matrix: SparseMatrix, x: np.ndarray) -> np.ndarray:
    """
    Sparse matrix-vector product.
    Args:
        matrix (SparseMatrix): CSR matrix.
        x (np.ndarray): Vector with as many entries as the matrix has columns.
    Returns:
        np.ndarray: matrix @ x.
    Raises:
        DimensionError: If the sizes do not match.
    """

    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.shape[0] != matrix.shape[1]:
        raise DimensionError(f"cannot multiply {matrix.shape[0]}x{matrix.shape[1]} matrix with vector {x.shape}")

    return np.asarray(matrix @ x, dtype=float)


class SaddleFactorization:
    """
    A factorized saddle system that can be solved for many right-hand sides.

    The LU backend reorders the full indefinite block matrix with reverse Cuthill-McKee and
    factorizes it with SuperLU using partial pivoting; the GMRES backend keeps an incomplete LU
    of the velocity block and an LU of a pressure Schur-complement surrogate as block-diagonal
    preconditioner.
    """

    def __init__(self, system: SaddleSystem, backend: SolverBackend = "lu") -> None:
        self.system = system
        self.backend = backend
        self.matrix = system.block_matrix()
        self.size = self.matrix.shape[0]

        if backend == "lu":
            self._factorize_lu()
        else:
            self._build_preconditioner()

    def _factorize_lu(self) -> None:
        if self.size == 0:
            self.perm = np.zeros(0, dtype=np.int64)
            self.lu = None
            return

        self.perm = reverse_cuthill_mckee(self.matrix, symmetric_mode=False).astype(np.int64)
        permuted = self.matrix[self.perm][:, self.perm].tocsc()

        try:
            self.lu = spla.splu(permuted, permc_spec="NATURAL", diag_pivot_thresh=1.0)
        except RuntimeError as e:
            raise SingularSystemError(f"saddle system is singular: {get_exception_msg(e)}") from e

        pivots = np.abs(self.lu.U.diagonal())
        threshold = self.size * np.finfo(float).eps * max(pivots.max(initial=0.0), 1e-300)
        small = np.flatnonzero(pivots <= threshold)
        if small.size:
            column = int(self.lu.perm_c[small[0]]) if self.lu.perm_c is not None else int(small[0])
            raise SingularSystemError("saddle system is numerically singular", pivot=int(self.perm[column]))

    def _build_preconditioner(self) -> None:
        n, m = self.system.num_primal, self.system.num_dual
        a = self.system.a.tocsc()
        a_ilu = spla.spilu(a, drop_tol=1e-6, fill_factor=30)

        if m:
            schur = self.system.schur
            if schur is None:
                inv_diag = sp.diags(1.0 / self.system.a.diagonal())
                schur = (self.system.bt.T @ inv_diag @ self.system.bt).tocsr()
            try:
                schur_lu = spla.splu(sp.csc_matrix(schur))
            except RuntimeError as e:
                raise SingularSystemError(f"pressure Schur approximation is singular: {get_exception_msg(e)}") from e

        def apply(r: np.ndarray) -> np.ndarray:
            z = np.empty_like(r)
            z[:n] = a_ilu.solve(r[:n])
            if m:
                z[n:] = schur_lu.solve(r[n:])
            return z

        self.preconditioner = spla.LinearOperator((n + m, n + m), matvec=apply, dtype=float)

    def residual(self, solution: np.ndarray, rhs: np.ndarray) -> float:
        return float(np.linalg.norm(rhs - self.matrix @ solution))

    def solve(self, rhs: np.ndarray, tol: float = DEFAULT_TOL) -> SolveResult:
        rhs = np.asarray(rhs, dtype=float)
        if rhs.shape != (self.size,):
            raise DimensionError(f"rhs has shape {rhs.shape}, expected ({self.size},)")

        rhs_norm = float(np.linalg.norm(rhs))
        if rhs_norm == 0.0:
            return SolveResult(solution=np.zeros(self.size), residual=0.0, iterations=0, backend=self.backend)

        if self.backend == "lu":
            result = self._solve_lu(rhs, rhs_norm, tol)
        else:
            result = self._solve_gmres(rhs, rhs_norm, tol)

        logger.debug(SOLVE_DONE.format(self.backend, result.residual / rhs_norm, result.iterations))

        return result

    def _solve_lu(self, rhs: np.ndarray, rhs_norm: float, tol: float) -> SolveResult:
        solution = np.zeros(self.size)
        correction_rhs = rhs
        iterations = 0

        for _ in range(1 + REFINEMENT_STEPS):
            step = np.empty(self.size)
            step[self.perm] = self.lu.solve(correction_rhs[self.perm])
            solution += step
            iterations += 1
            correction_rhs = rhs - self.matrix @ solution
            if np.linalg.norm(correction_rhs) <= tol * rhs_norm:
                break

        residual = float(np.linalg.norm(correction_rhs))
        if not np.all(np.isfinite(solution)):
            raise SingularSystemError("LU solve produced non-finite values")
        if residual > tol * rhs_norm:
            logger.warning(f"LU residual {residual / rhs_norm:.3e} above requested tolerance {tol:.1e}")

        return SolveResult(solution=solution, residual=residual, iterations=iterations, backend="lu")

    def _solve_gmres(self, rhs: np.ndarray, rhs_norm: float, tol: float) -> SolveResult:
        count = 0

        def callback(_: float) -> None:
            nonlocal count
            count += 1

        solution, info = spla.gmres(
            self.matrix,
            rhs,
            rtol=tol,
            atol=0.0,
            restart=min(self.size, 200),
            maxiter=GMRES_MAX_ITER,
            M=self.preconditioner,
            callback=callback,
            callback_type="pr_norm",
        )
        if info != 0:
            raise ConvergenceError("GMRES did not reach the requested tolerance", iterations=count)

        residual = self.residual(solution, rhs)
        if residual > 10.0 * tol * rhs_norm:
            raise ConvergenceError(f"GMRES true residual {residual / rhs_norm:.3e} above tolerance", iterations=count)

        return SolveResult(solution=solution, residual=residual, iterations=count, backend="gmres")


def factorize_saddle(system: SaddleSystem, backend: SolverBackend = "lu") -> SaddleFactorization:
    return SaddleFactorization(system, backend)


def solve_saddle(
    system: SaddleSystem, tol: float = DEFAULT_TOL, backend: SolverBackend = "lu"
) -> tuple[np.ndarray, float, int]:
    """
    Solves a saddle-point system.
    Args:
        system (SaddleSystem): The block system and its right-hand side.
        tol (float): Relative residual target, ||residual|| <= tol * ||rhs||.
        backend (SolverBackend): "lu" (default, deterministic) or "gmres".
    Returns:
        tuple[np.ndarray, float, int]: Solution, residual norm and iteration count.
    Raises:
        SingularSystemError: If the factorization meets a zero pivot.
        ConvergenceError: If GMRES does not converge.
    """

    result = factorize_saddle(system, backend).solve(system.rhs, tol)

    return result.solution, result.residual, result.iterations


def block_rhs(primal: np.ndarray, dual: Optional[np.ndarray] = None) -> np.ndarray:
    return np.concatenate([primal, dual if dual is not None else np.zeros(0)])
