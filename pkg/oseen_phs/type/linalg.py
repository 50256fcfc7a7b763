from __future__ import annotations

from typing import Literal, Optional

import numpy as np
import scipy.sparse as sp
from pydantic import BaseModel, ConfigDict, model_validator


__all__ = ["SparseMatrix", "SaddleSystem", "SolverBackend", "SolveResult"]


SparseMatrix = sp.csr_matrix
SolverBackend = Literal["lu", "gmres"]


class SaddleSystem(BaseModel):
    """
    Block system [[A, Bt], [Bt^T, 0]] [x; y] = rhs.

    `free` records which global velocity dofs the rows of A stand for; `schur` optionally
    supplies an SPD approximation of the pressure Schur complement for the GMRES backend.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    a: sp.csr_matrix
    bt: sp.csr_matrix
    rhs: np.ndarray
    free: Optional[np.ndarray] = None
    schur: Optional[sp.csr_matrix] = None

    @model_validator(mode="after")
    def _check_shapes(self) -> "SaddleSystem":
        n, m = self.a.shape[0], self.bt.shape[1]
        if self.a.shape != (n, n):
            raise ValueError(f"A must be square, got {self.a.shape}")
        if self.bt.shape[0] != n:
            raise ValueError(f"Bt has {self.bt.shape[0]} rows, A has {n}")
        if self.rhs.shape != (n + m,):
            raise ValueError(f"rhs has shape {self.rhs.shape}, expected ({n + m},)")
        if self.schur is not None and self.schur.shape != (m, m):
            raise ValueError(f"Schur approximation has shape {self.schur.shape}, expected ({m}, {m})")
        return self

    @property
    def num_primal(self) -> int:
        return self.a.shape[0]

    @property
    def num_dual(self) -> int:
        return self.bt.shape[1]

    def block_matrix(self) -> sp.csr_matrix:
        return sp.bmat([[self.a, self.bt], [self.bt.T, None]], format="csr") if self.num_dual else self.a.tocsr()


class SolveResult(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    solution: np.ndarray
    residual: float
    iterations: int
    backend: SolverBackend
