import json
import os
from tempfile import NamedTemporaryFile

import meshio
import numpy as np
import scipy.sparse as sp

import oseen_phs.utils.files as files
from oseen_phs.const import LEDGER_COLUMNS
from oseen_phs.type import EnergyLedger, FlowState, LedgerRow


def test_write_ledger_csv(tmp_path):
    ledger = EnergyLedger()
    ledger.append(LedgerRow(t=0.0, H=1.0))
    ledger.append(LedgerRow(t=0.1, dt=0.1, H=0.9, dissipation=-1.0 / 3.0, residual=1e-17))
    path = str(tmp_path / "ledger.csv")

    files.write_ledger_csv(ledger, path)

    with open(path) as f:
        lines = f.read().splitlines()
    assert lines[0] == ",".join(LEDGER_COLUMNS)
    assert len(lines) == 3
    data = np.loadtxt(path, delimiter=",", skiprows=1)
    assert data[1, LEDGER_COLUMNS.index("dissipation")] == -1.0 / 3.0
    assert data[1, LEDGER_COLUMNS.index("residual")] == 1e-17


def test_write_empty_ledger(tmp_path):
    path = str(tmp_path / "ledger.csv")

    files.write_ledger_csv(EnergyLedger(), path)

    with open(path) as f:
        assert f.read().strip() == ",".join(LEDGER_COLUMNS)


def test_write_vtk(tmp_path, channel, rng):
    state = FlowState(p=2.0 * rng.standard_normal(2 * channel.num_nodes), P=rng.standard_normal(channel.num_vertices))
    path = str(tmp_path / "state.vtk")

    files.write_vtk(channel, state, path, rho=2.0)

    grid = meshio.read(path)
    assert grid.points.shape == (channel.num_nodes, 3)
    assert grid.cells[0].type == "triangle6"
    assert np.allclose(grid.point_data["velocity"][:, 0], state.p[: channel.num_nodes] / 2.0)
    assert np.allclose(grid.point_data["pressure"][: channel.num_vertices], state.P)


def test_vertex_pressure_to_nodes(channel):
    pressure = channel.points[:, 0] + 2.0 * channel.points[:, 1]

    extended = files.vertex_pressure_to_nodes(channel, pressure)

    points = channel.quadratic_points
    assert np.allclose(extended, points[:, 0] + 2.0 * points[:, 1])


def test_write_matrix_dump(tmp_path):
    matrix = sp.csr_matrix(np.array([[1.5, 0.0], [0.0, -2.0], [3.0, 0.0]]))
    path = str(tmp_path / "matrix.txt")

    files.write_matrix_dump(matrix, path)

    with open(path) as f:
        lines = f.read().splitlines()
    assert lines[0] == "3 2 3"
    assert lines[1:] == ["0 0 1.5", "1 1 -2", "2 0 3"]


def test_write_json_file():
    file = NamedTemporaryFile(delete=False, suffix=".json")
    file.close()

    files.write_json_file({"status": "ok", "error": None, "steps": 3}, file.name)

    with open(file.name) as f:
        assert json.load(f) == {"status": "ok", "error": None, "steps": 3}
    os.unlink(file.name)


def test_ensure_directory(tmp_path):
    path = str(tmp_path / "a" / "b")

    assert files.ensure_directory(path) == path
    assert os.path.isdir(path)
    files.ensure_directory(path)
