from __future__ import annotations

from enum import Enum
from functools import cached_property

import numpy as np
from pydantic import BaseModel, ConfigDict


__all__ = ["BoundaryTag", "BoundaryEdge", "Mesh", "Violation"]


class BoundaryTag(str, Enum):
    IN = "in"
    WALL = "wall"
    OUT = "out"


BoundaryEdge = tuple[int, int, BoundaryTag]


class Violation(BaseModel):
    """A broken rule found by a diagnostic; violations are reported, never raised."""

    model_config = ConfigDict(frozen=True)

    rule: str
    entity: str
    detail: str = ""

    def __str__(self) -> str:
        return f"{self.rule}: {self.entity}" + (f" ({self.detail})" if self.detail else "")


class Mesh(BaseModel):
    """
    Triangulated 2-D domain with tagged boundary edges.

    Vertices come first in the node numbering of quadratic elements, followed by one midpoint
    per unique edge (in the order of `edges`). Instances are immutable; every derived array
    below is computed once on first access.
    """

    model_config = ConfigDict(frozen=True)

    nodes: tuple[tuple[float, float], ...]
    triangles: tuple[tuple[int, int, int], ...]
    boundary_edges: tuple[BoundaryEdge, ...]

    def __hash__(self):
        return hash((self.nodes, self.triangles, self.boundary_edges))

    def __eq__(self, other: object) -> bool:
        # derived arrays are cached next to the fields; compare the fields only
        if not isinstance(other, Mesh):
            return NotImplemented
        return (self.nodes, self.triangles, self.boundary_edges) == (other.nodes, other.triangles, other.boundary_edges)

    @property
    def num_vertices(self) -> int:
        return len(self.nodes)

    @cached_property
    def points(self) -> np.ndarray:
        return np.array(self.nodes, dtype=float).reshape(-1, 2)

    @cached_property
    def cells(self) -> np.ndarray:
        return np.array(self.triangles, dtype=np.int64).reshape(-1, 3)

    @cached_property
    def edge_structure(self) -> tuple[np.ndarray, np.ndarray]:
        # local edges (0,1), (1,2), (2,0) of every triangle
        local = self.cells[:, [0, 1, 1, 2, 2, 0]].reshape(-1, 3, 2)
        keys = np.sort(local.reshape(-1, 2), axis=1)
        edges, inverse = np.unique(keys, axis=0, return_inverse=True)
        return edges, inverse.reshape(-1, 3)

    @cached_property
    def edges(self) -> np.ndarray:
        """Unique edges as sorted vertex pairs, shape (n_edges, 2)."""
        return self.edge_structure[0]

    @cached_property
    def cell_edges(self) -> np.ndarray:
        """Global edge index of the local edges (0,1), (1,2), (2,0) of each triangle."""
        return self.edge_structure[1]

    @cached_property
    def edge_index(self) -> dict[tuple[int, int], int]:
        return {(int(a), int(b)): k for k, (a, b) in enumerate(self.edges)}

    @property
    def num_nodes(self) -> int:
        """Vertices plus edge midpoints."""
        return self.num_vertices + len(self.edges)

    @cached_property
    def quadratic_points(self) -> np.ndarray:
        midpoints = 0.5 * (self.points[self.edges[:, 0]] + self.points[self.edges[:, 1]])
        return np.vstack([self.points, midpoints])

    @cached_property
    def quadratic_cells(self) -> np.ndarray:
        """Six nodes per triangle: three vertices, then midpoints of (0,1), (1,2), (2,0)."""
        return np.hstack([self.cells, self.num_vertices + self.cell_edges])

    @cached_property
    def max_edge_length(self) -> float:
        lengths = np.linalg.norm(self.points[self.edges[:, 1]] - self.points[self.edges[:, 0]], axis=1)
        return float(lengths.max(initial=0.0))

    @cached_property
    def signed_areas(self) -> np.ndarray:
        p = self.points[self.cells]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    def edges_with_tag(self, tag: BoundaryTag) -> list[tuple[int, int]]:
        return [(i, j) for i, j, t in self.boundary_edges if t == tag]

    def midpoint_of(self, i: int, j: int) -> int:
        return self.num_vertices + self.edge_index[(min(i, j), max(i, j))]
