from __future__ import annotations

from functools import cached_property
from typing import Any, Optional

import numpy as np
import scipy.sparse as sp
from scipy.linalg import solve
from pydantic import BaseModel, ConfigDict

from .forms import AssembledForms, DofMap
from .mesh import Mesh


__all__ = ["DiscreteOseenNode", "ReducedSystem"]


def restrict(matrix: sp.spmatrix, rows: np.ndarray, cols: np.ndarray) -> sp.csr_matrix:
    return sp.csr_matrix(matrix[rows][:, cols])


class DiscreteOseenNode(BaseModel):
    """
    Assembled dissipation node of the Oseen problem on one mesh.

    The interior operator is `generator = -mu Stiff + rho Adv - c Mass`, acting on velocities;
    momentum p = rho v is the state and H(p) = p^T Mass p / (2 rho) the energy. Restrictions to
    the free dofs F and the Dirichlet dofs D are computed once and kept.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    mesh: Mesh
    forms: AssembledForms
    dofmap: DofMap
    convection: Optional[Any] = None

    def __hash__(self):
        return id(self)

    @property
    def mu(self) -> float:
        return self.forms.mu

    @property
    def rho(self) -> float:
        return self.forms.rho

    @property
    def c(self) -> float:
        return self.forms.c

    @property
    def num_velocity(self) -> int:
        return self.forms.num_velocity

    @property
    def num_pressure(self) -> int:
        return self.forms.num_pressure

    @cached_property
    def generator(self) -> sp.csr_matrix:
        f = self.forms
        return sp.csr_matrix(-f.mu * f.stiff + f.rho * f.adv - f.c * f.mass)

    @cached_property
    def mass_ff(self) -> sp.csr_matrix:
        return restrict(self.forms.mass, self.dofmap.free_dofs, self.dofmap.free_dofs)

    @cached_property
    def mass_fd(self) -> sp.csr_matrix:
        return restrict(self.forms.mass, self.dofmap.free_dofs, self.dofmap.dirichlet_dofs)

    @cached_property
    def generator_ff(self) -> sp.csr_matrix:
        return restrict(self.generator, self.dofmap.free_dofs, self.dofmap.free_dofs)

    @cached_property
    def generator_fd(self) -> sp.csr_matrix:
        return restrict(self.generator, self.dofmap.free_dofs, self.dofmap.dirichlet_dofs)

    @cached_property
    def div_f(self) -> sp.csr_matrix:
        return sp.csr_matrix(self.forms.div[:, self.dofmap.free_dofs])

    @cached_property
    def div_d(self) -> sp.csr_matrix:
        return sp.csr_matrix(self.forms.div[:, self.dofmap.dirichlet_dofs])

    @cached_property
    def neumann_f(self) -> sp.csr_matrix:
        return sp.csr_matrix(self.forms.neumann[self.dofmap.free_dofs])


class ReducedSystem(BaseModel):
    """
    Dense divergence-free reduction: rho * mass * dx/dt = generator @ x + input_map @ u_sigma(t).

    `basis` has orthonormal columns spanning the discretely divergence-free free-dof fields;
    full velocities are `offset + E_F basis x`, where `offset` is the steady solution for the
    time-constant Dirichlet data.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    basis: np.ndarray
    mass: np.ndarray
    generator: np.ndarray
    input_map: np.ndarray
    rho: float = 1.0
    free: Optional[np.ndarray] = None
    offset: Optional[np.ndarray] = None

    @property
    def size(self) -> int:
        return self.mass.shape[0]

    @cached_property
    def dynamics(self) -> tuple[np.ndarray, np.ndarray]:
        """(A, B) of the explicit form dx/dt = A x + B u."""
        if self.size == 0:
            return np.zeros((0, 0)), np.zeros((0, self.input_map.shape[1]))
        scaled = self.rho * self.mass
        return solve(scaled, self.generator, assume_a="pos"), solve(scaled, self.input_map, assume_a="pos")
