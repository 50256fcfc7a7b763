import numpy as np
import pytest

from oseen_phs.mesh import build_channel_mesh, load_mesh, mesh_summary, read_mesh_file, save_mesh, validate_mesh
from oseen_phs.utils.errors import MeshError, MeshFormatError
from oseen_phs.type import BoundaryTag, Mesh


SINGLE_TRIANGLE = """# one triangle
nodes 3
0 0
1 0
0 1
triangles 1
0 1 2
boundary_edges 3
0 1 wall
1 2 out
2 0 in
"""


def test_channel_counts():
    mesh = build_channel_mesh(2.0, 1.0, 4, 2)

    assert mesh.num_vertices == 15
    assert len(mesh.triangles) == 16
    assert len(mesh.boundary_edges) == 12
    assert len(mesh.edges_with_tag(BoundaryTag.IN)) == 2
    assert len(mesh.edges_with_tag(BoundaryTag.OUT)) == 2
    assert len(mesh.edges_with_tag(BoundaryTag.WALL)) == 8


@pytest.mark.parametrize("nx, ny", [(1, 1), (2, 2), (3, 3), (4, 2), (16, 8)])
def test_channel_is_valid(nx, ny):
    mesh = build_channel_mesh(2.0, 1.0, nx, ny)

    assert validate_mesh(mesh) == []
    assert np.all(mesh.signed_areas > 0)
    assert np.isclose(mesh.signed_areas.sum(), 2.0, rtol=1e-12)


def test_channel_quadratic_nodes(channel):
    # vertices + one midpoint per unique edge (Euler: E = V + T - 1)
    assert channel.num_nodes == 15 + (15 + 16 - 1)
    assert channel.quadratic_cells.shape == (16, 6)
    midpoint = channel.midpoint_of(0, 1)
    assert np.allclose(channel.quadratic_points[midpoint], [0.25, 0.0])


def test_channel_is_cached():
    assert build_channel_mesh(2.0, 1.0, 3, 2) is build_channel_mesh(2.0, 1.0, 3, 2)


@pytest.mark.parametrize("args", [(0.0, 1.0, 2, 2), (2.0, -1.0, 2, 2), (2.0, 1.0, 0, 2), (2.0, 1.0, 2, 1.5)])
def test_channel_rejects_bad_arguments(args):
    with pytest.raises(MeshError):
        build_channel_mesh(*args)


def test_save_load(channel):
    loaded = load_mesh(save_mesh(channel))

    assert loaded == channel
    assert loaded.boundary_edges[0][2] is BoundaryTag.WALL


def test_load_single_triangle():
    mesh = load_mesh(SINGLE_TRIANGLE)

    assert mesh.nodes == ((0.0, 0.0), (1.0, 0.0), (0.0, 1.0))
    assert mesh.triangles == ((0, 1, 2),)
    assert [tag for _, _, tag in mesh.boundary_edges] == [BoundaryTag.WALL, BoundaryTag.OUT, BoundaryTag.IN]


@pytest.mark.parametrize("tag", ["IN", "Wall", "oUT", "in_"])
def test_load_tags_are_exact_lowercase(tag):
    with pytest.raises(MeshFormatError) as e:
        load_mesh(SINGLE_TRIANGLE.replace("2 0 in", f"2 0 {tag}"))

    assert e.value.line == 11
    assert f"'{tag}'" in str(e.value)


@pytest.mark.parametrize(
    "old, new, line",
    [
        ("2 0 in", "2 0 sideways", 11),
        ("0 1 2\n", "0 1 5\n", 7),
        ("1 0\n", "1 x\n", 4),
        ("triangles 1", "triangles one", 6),
    ],
)
def test_load_reports_line(old, new, line):
    with pytest.raises(MeshFormatError) as e:
        load_mesh(SINGLE_TRIANGLE.replace(old, new, 1))

    assert e.value.line == line, f"wrong line in '{e.value}'"
    assert str(e.value).startswith(f"line {line}:")


def test_load_rejects_trailing_content():
    with pytest.raises(MeshFormatError):
        load_mesh(SINGLE_TRIANGLE + "3 4 wall\n")


def test_load_rejects_missing_section():
    with pytest.raises(MeshFormatError):
        load_mesh("nodes 1\n0 0\n")


def _rules(mesh: Mesh) -> set[str]:
    return {v.rule for v in validate_mesh(mesh)}


def test_validate_in_out_touch():
    assert "in/out touch" in _rules(load_mesh(SINGLE_TRIANGLE))


def test_validate_missing_out(channel):
    edges = tuple((i, j, BoundaryTag.WALL if t == BoundaryTag.OUT else t) for i, j, t in channel.boundary_edges)
    mesh = Mesh(nodes=channel.nodes, triangles=channel.triangles, boundary_edges=edges)

    assert "missing out" in _rules(mesh)


def test_validate_uncovered_and_orientation(channel):
    flipped = ((channel.triangles[0][0], channel.triangles[0][2], channel.triangles[0][1]),) + channel.triangles[1:]
    mesh = Mesh(nodes=channel.nodes, triangles=flipped, boundary_edges=channel.boundary_edges[1:])

    rules = _rules(mesh)
    assert "non-positive area" in rules
    assert "uncovered boundary" in rules


def test_validate_tag_overlap(channel):
    i, j, _ = channel.boundary_edges[0]
    edges = channel.boundary_edges + ((j, i, BoundaryTag.OUT),)
    mesh = Mesh(nodes=channel.nodes, triangles=channel.triangles, boundary_edges=edges)

    assert "tag overlap" in _rules(mesh)


def test_read_mesh_file_missing(tmp_path):
    path = str(tmp_path / "missing.mesh")

    with pytest.raises(MeshError) as e:
        read_mesh_file(path)

    assert path in str(e.value)


def test_read_mesh_file(tmp_path, channel):
    path = tmp_path / "channel.mesh"
    path.write_text(save_mesh(channel))

    assert read_mesh_file(str(path)) == channel


def test_mesh_summary(channel):
    summary = mesh_summary(channel)

    assert summary["nodes"] == 15
    assert summary["in_edges"] == 2
    assert summary["wall_edges"] == 8
    assert np.isclose(summary["area"], 2.0)
