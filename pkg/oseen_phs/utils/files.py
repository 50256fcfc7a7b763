import json
import os
from typing import Any

import meshio
import numpy as np
import scipy.sparse as sp

from oseen_phs.const import ARTIFACT_WRITTEN, LEDGER_COLUMNS
from oseen_phs.utils.logger import logger
from oseen_phs.type import EnergyLedger, FlowState, Mesh


def ensure_directory(path: str) -> str:
    """Creates `path` (and parents) if missing; returns it."""
    os.makedirs(path, exist_ok=True)
    return path


def write_ledger_csv(ledger: EnergyLedger, path: str) -> None:
    """
    Writes the ledger as CSV with the columns t,H,dissipation,supply_in,supply_out,residual,div_inf.
    Args:
        ledger (EnergyLedger): The ledger; an empty ledger yields a header-only file.
        path (str): Output file.
    """

    if len(ledger):
        data = np.column_stack([ledger.column(name) for name in LEDGER_COLUMNS])
    else:
        data = np.empty((0, len(LEDGER_COLUMNS)))

    np.savetxt(path, data, fmt="%.17g", delimiter=",", header=",".join(LEDGER_COLUMNS), comments="")
    logger.debug(ARTIFACT_WRITTEN.format(path))


def vertex_pressure_to_nodes(mesh: Mesh, pressure: np.ndarray) -> np.ndarray:
    """Extends a vertex pressure to the edge midpoints by linear interpolation."""
    pressure = np.asarray(pressure, dtype=float)
    midpoints = 0.5 * (pressure[mesh.edges[:, 0]] + pressure[mesh.edges[:, 1]])
    return np.concatenate([pressure, midpoints])


def write_vtk(mesh: Mesh, state: FlowState, path: str, rho: float = 1.0) -> None:
    """
    Writes a state as a legacy ASCII VTK unstructured grid of quadratic triangles.
    Args:
        mesh (Mesh): The mesh of the state.
        state (FlowState): Momentum and pressure.
        path (str): Output file.
        rho (float): Density converting momentum to velocity.
    Returns:
        None
    """

    n = mesh.num_nodes
    v = state.velocity(rho)
    points = np.column_stack([mesh.quadratic_points, np.zeros(n)])
    velocity = np.column_stack([v[:n], v[n:], np.zeros(n)])

    grid = meshio.Mesh(
        points=points,
        cells=[("triangle6", mesh.quadratic_cells)],
        point_data={"velocity": velocity, "pressure": vertex_pressure_to_nodes(mesh, state.P)},
    )
    meshio.write(path, grid, file_format="vtk42", binary=False)
    logger.debug(ARTIFACT_WRITTEN.format(path))


def write_matrix_dump(matrix: sp.spmatrix, path: str) -> None:
    """Writes `rows cols nnz` followed by one `i j value` line per stored entry (0-based)."""

    coo = sp.csr_matrix(matrix).tocoo()
    with open(path, "w") as f:
        f.write(f"{coo.shape[0]} {coo.shape[1]} {coo.nnz}\n")
        for i, j, value in zip(coo.row, coo.col, coo.data):
            f.write(f"{i} {j} {value:.17g}\n")

    logger.debug(ARTIFACT_WRITTEN.format(path))


def write_json_file(data: dict[str, Any], path: str) -> None:
    with open(path, "w") as json_file:
        json.dump(data, json_file, indent=4)

    logger.debug(ARTIFACT_WRITTEN.format(path))
