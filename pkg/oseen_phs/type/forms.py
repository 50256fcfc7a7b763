from __future__ import annotations

from functools import cached_property

import numpy as np
import scipy.sparse as sp
from pydantic import BaseModel, ConfigDict

from .mesh import BoundaryTag


__all__ = ["DofMap", "AssembledForms"]


class DofMap(BaseModel):
    """
    Degree-of-freedom bookkeeping for quadratic velocity / linear pressure elements.

    Velocity dofs are component-blocked (`comp * num_nodes + node`). Trace vectors on the
    In and Out boundaries are component-blocked over `in_nodes` / `out_nodes`.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    num_nodes: int
    num_pressure: int
    in_nodes: np.ndarray
    wall_nodes: np.ndarray
    out_nodes: np.ndarray
    in_wall_nodes: np.ndarray

    @property
    def num_velocity(self) -> int:
        return 2 * self.num_nodes

    def node_dofs(self, nodes: np.ndarray) -> np.ndarray:
        nodes = np.asarray(nodes, dtype=np.int64)
        return np.concatenate([nodes, nodes + self.num_nodes])

    @cached_property
    def in_dofs(self) -> np.ndarray:
        """D_in, ordered like an In trace vector."""
        return self.node_dofs(self.in_nodes)

    @cached_property
    def wall_dofs(self) -> np.ndarray:
        return self.node_dofs(self.wall_nodes)

    @cached_property
    def out_dofs(self) -> np.ndarray:
        """Velocity dofs of the Out trace, ordered like an Out trace vector."""
        return self.node_dofs(self.out_nodes)

    @cached_property
    def dirichlet_dofs(self) -> np.ndarray:
        return np.sort(np.concatenate([self.in_dofs, self.wall_dofs]))

    @cached_property
    def free_dofs(self) -> np.ndarray:
        mask = np.ones(self.num_velocity, dtype=bool)
        mask[self.dirichlet_dofs] = False
        return np.flatnonzero(mask)

    @cached_property
    def in_wall_trace(self) -> np.ndarray:
        """Positions inside an In trace vector that sit on the closure of the wall."""
        position = np.searchsorted(self.in_nodes, self.in_wall_nodes)
        return np.concatenate([position, position + len(self.in_nodes)])

    @cached_property
    def out_free_trace(self) -> np.ndarray:
        """Positions inside an Out trace vector whose dofs are free (not on the wall closure)."""
        return np.flatnonzero(np.isin(self.out_dofs, self.free_dofs))

    def trace_nodes(self, boundary: BoundaryTag) -> np.ndarray:
        if boundary == BoundaryTag.IN:
            return self.in_nodes
        if boundary == BoundaryTag.OUT:
            return self.out_nodes
        return self.wall_nodes

    def trace_dofs(self, boundary: BoundaryTag) -> np.ndarray:
        return self.node_dofs(self.trace_nodes(boundary))

    def trace_size(self, boundary: BoundaryTag) -> int:
        return 2 * len(self.trace_nodes(boundary))


class AssembledForms(BaseModel):
    """
    Sparse operators of every bilinear form and trace map of the node.

    `adv` is the skew-symmetrized advection matrix without the density; `div` holds
    `-<q, div phi>`; the trace mass matrices act on component-blocked trace vectors and
    `neumann` maps an Out trace vector to its velocity load vector.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    mass: sp.csr_matrix
    stiff: sp.csr_matrix
    adv: sp.csr_matrix
    div: sp.csr_matrix
    pressure_mass: sp.csr_matrix
    trace_mass_in: sp.csr_matrix
    trace_mass_out: sp.csr_matrix
    neumann: sp.csr_matrix
    mu: float
    rho: float
    c: float = 0.0

    @property
    def num_velocity(self) -> int:
        return self.mass.shape[0]

    @property
    def num_pressure(self) -> int:
        return self.div.shape[0]
