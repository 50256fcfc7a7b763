import os
from collections import Counter
from threading import Lock
from typing import Any

import numpy as np
from cachetools import LRUCache, cached
from cachetools.keys import hashkey

from oseen_phs.const import COMMENT, MESH_BUILT, MESH_LOADED, MESH_SECTION_EDGES, MESH_SECTION_NODES
from oseen_phs.const import MESH_SECTION_TRIANGLES
from oseen_phs.utils.errors import MeshError, MeshFormatError
from oseen_phs.utils.logger import logger
from oseen_phs.type import BoundaryTag, Mesh, Violation


def __channel_key(length: float, height: float, nx: int, ny: int) -> Any:
    return hashkey(length, height, nx, ny)


@cached(cache=LRUCache(maxsize=16), key=__channel_key, lock=Lock())
def build_channel_mesh(length: float, height: float, nx: int, ny: int) -> Mesh:
    """
    Builds a structured triangulation of the channel [0, length] x [0, height].
    Every grid cell is split into two counterclockwise triangles. The diagonal of each cell
    points towards the nearest domain corner, so no triangle owns two edges meeting at a
    corner of the channel (this keeps the corner pressure dofs controlled by free velocities).
    Args:
        length (float): Channel length, x extent.
        height (float): Channel height, y extent.
        nx (int): Cells along x.
        ny (int): Cells along y.
    Returns:
        Mesh: Left edge tagged In, right edge Out, top and bottom Wall.
    Raises:
        MeshError: If a dimension or subdivision count is not positive.
    """

    if not (length > 0 and height > 0):
        raise MeshError(f"channel dimensions must be positive, got length={length}, height={height}")
    if int(nx) != nx or int(ny) != ny or nx < 1 or ny < 1:
        raise MeshError(f"subdivision counts must be positive integers, got nx={nx}, ny={ny}")

    nx, ny = int(nx), int(ny)
    xs = np.linspace(0.0, length, nx + 1)
    ys = np.linspace(0.0, height, ny + 1)
    nodes = tuple((float(x), float(y)) for y in ys for x in xs)

    def index(i: int, j: int) -> int:
        return j * (nx + 1) + i

    triangles: list[tuple[int, int, int]] = []
    for j in range(ny):
        for i in range(nx):
            a, b, c, d = index(i, j), index(i + 1, j), index(i + 1, j + 1), index(i, j + 1)
            if (2 * i + 1 <= nx) == (2 * j + 1 <= ny):
                triangles += [(a, b, c), (a, c, d)]
            else:
                triangles += [(a, b, d), (b, c, d)]

    edges: list[tuple[int, int, BoundaryTag]] = []
    edges += [(index(i, 0), index(i + 1, 0), BoundaryTag.WALL) for i in range(nx)]
    edges += [(index(nx, j), index(nx, j + 1), BoundaryTag.OUT) for j in range(ny)]
    edges += [(index(i + 1, ny), index(i, ny), BoundaryTag.WALL) for i in range(nx)]
    edges += [(index(0, j + 1), index(0, j), BoundaryTag.IN) for j in range(ny)]

    mesh = Mesh(nodes=nodes, triangles=tuple(triangles), boundary_edges=tuple(edges))
    logger.debug(MESH_BUILT.format(len(nodes), len(triangles), len(edges)))

    return mesh


def save_mesh(mesh: Mesh) -> str:
    """Serializes a mesh to the line-oriented text format read by `load_mesh`."""

    lines = [f"{MESH_SECTION_NODES} {len(mesh.nodes)}"]
    lines += [f"{x!r} {y!r}" for x, y in mesh.nodes]
    lines.append(f"{MESH_SECTION_TRIANGLES} {len(mesh.triangles)}")
    lines += [f"{i} {j} {k}" for i, j, k in mesh.triangles]
    lines.append(f"{MESH_SECTION_EDGES} {len(mesh.boundary_edges)}")
    lines += [f"{i} {j} {tag.value}" for i, j, tag in mesh.boundary_edges]

    return "\n".join(lines) + "\n"


def _content_lines(text: str) -> list[tuple[int, list[str]]]:
    content = []
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split(COMMENT, 1)[0].strip()
        if line:
            content.append((number, line.split()))
    return content


def load_mesh(text: str) -> Mesh:
    """
    Parses a mesh file.
    Args:
        text (str): File content: `nodes N` + N lines `x y`, `triangles M` + M lines `i j k`,
            `boundary_edges K` + K lines `i j tag`; `#` starts a comment.
    Returns:
        Mesh: The mesh with exactly the listed entities.
    Raises:
        MeshFormatError: On syntax errors, unknown tags or out-of-range indices, naming the line.
    """

    lines = _content_lines(text)
    cursor = 0

    def section(name: str) -> int:
        nonlocal cursor
        if cursor >= len(lines):
            raise MeshFormatError(f"missing section '{name}'")
        number, tokens = lines[cursor]
        if len(tokens) != 2 or tokens[0] != name:
            raise MeshFormatError(f"expected '{name} <count>'", number)
        try:
            count = int(tokens[1])
        except ValueError:
            raise MeshFormatError(f"invalid count '{tokens[1]}'", number) from None
        if count < 0:
            raise MeshFormatError(f"negative count {count}", number)
        cursor += 1
        return count

    def records(count: int, width: int) -> list[tuple[int, list[str]]]:
        nonlocal cursor
        block = lines[cursor : cursor + count]
        if len(block) < count:
            raise MeshFormatError(f"expected {count} records, found {len(block)}")
        for number, tokens in block:
            if len(tokens) != width:
                raise MeshFormatError(f"expected {width} fields, found {len(tokens)}", number)
        cursor += count
        return block

    def to_index(token: str, number: int, bound: int) -> int:
        try:
            value = int(token)
        except ValueError:
            raise MeshFormatError(f"invalid index '{token}'", number) from None
        if not 0 <= value < bound:
            raise MeshFormatError(f"index {value} out of range [0, {bound})", number)
        return value

    nodes: list[tuple[float, float]] = []
    for number, tokens in records(section(MESH_SECTION_NODES), 2):
        try:
            nodes.append((float(tokens[0]), float(tokens[1])))
        except ValueError:
            raise MeshFormatError(f"invalid coordinates {' '.join(tokens)}", number) from None

    n = len(nodes)
    triangles = [
        (to_index(t[0], number, n), to_index(t[1], number, n), to_index(t[2], number, n))
        for number, t in records(section(MESH_SECTION_TRIANGLES), 3)
    ]

    edges = []
    for number, tokens in records(section(MESH_SECTION_EDGES), 3):
        try:
            tag = BoundaryTag(tokens[2])
        except ValueError:
            raise MeshFormatError(f"unknown boundary tag '{tokens[2]}'", number) from None
        edges.append((to_index(tokens[0], number, n), to_index(tokens[1], number, n), tag))

    if cursor < len(lines):
        raise MeshFormatError("unexpected trailing content", lines[cursor][0])

    mesh = Mesh(nodes=tuple(nodes), triangles=tuple(triangles), boundary_edges=tuple(edges))
    logger.debug(MESH_LOADED.format(len(nodes), len(triangles)))

    return mesh


def read_mesh_file(path: str) -> Mesh:
    if not os.path.isfile(path):
        raise MeshError(f"mesh file not found: {path}")

    with open(path, "r") as f:
        return load_mesh(f.read())


def validate_mesh(mesh: Mesh) -> list[Violation]:
    """
    Checks the discrete domain assumptions: consistent edge ownership, full and disjoint
    boundary tagging, separated In and Out sets, non-empty In and Out, positive areas.
    Args:
        mesh (Mesh): The mesh to check.
    Returns:
        list[Violation]: Empty if and only if every rule holds.
    """

    violations: list[Violation] = []
    n = len(mesh.nodes)

    for k, tri in enumerate(mesh.triangles):
        if any(not 0 <= i < n for i in tri):
            violations.append(Violation(rule="index range", entity=f"triangle {k}", detail=str(tri)))
    for k, (i, j, _) in enumerate(mesh.boundary_edges):
        if not (0 <= i < n and 0 <= j < n):
            violations.append(Violation(rule="index range", entity=f"boundary edge {k}", detail=f"({i}, {j})"))
    if violations:
        return violations

    for k, area in enumerate(mesh.signed_areas):
        if not area > 0.0:
            violations.append(Violation(rule="non-positive area", entity=f"triangle {k}", detail=f"{area:.3e}"))

    ownership = Counter(
        tuple(sorted(pair)) for tri in mesh.triangles for pair in ((tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0]))
    )
    for edge, count in ownership.items():
        if count > 2:
            violations.append(Violation(rule="edge multiplicity", entity=f"edge {edge}", detail=f"{count} triangles"))

    tags: dict[tuple[int, int], list[BoundaryTag]] = {}
    for i, j, tag in mesh.boundary_edges:
        tags.setdefault((min(i, j), max(i, j)), []).append(tag)

    for edge, edge_tags in sorted(tags.items()):
        if len(edge_tags) > 1:
            names = ", ".join(t.value for t in edge_tags)
            violations.append(Violation(rule="tag overlap", entity=f"edge {edge}", detail=names))
        if ownership.get(edge, 0) != 1:
            violations.append(
                Violation(rule="tagged interior edge", entity=f"edge {edge}", detail=f"{ownership.get(edge, 0)} cells")
            )

    for edge, count in sorted(ownership.items()):
        if count == 1 and edge not in tags:
            violations.append(Violation(rule="uncovered boundary", entity=f"edge {edge}"))

    in_nodes = {v for i, j in mesh.edges_with_tag(BoundaryTag.IN) for v in (i, j)}
    out_nodes = {v for i, j in mesh.edges_with_tag(BoundaryTag.OUT) for v in (i, j)}
    for node in sorted(in_nodes & out_nodes):
        violations.append(Violation(rule="in/out touch", entity=f"node {node}"))

    if not in_nodes:
        violations.append(Violation(rule="missing in", entity="boundary"))
    if not out_nodes:
        violations.append(Violation(rule="missing out", entity="boundary"))

    return violations


def mesh_summary(mesh: Mesh) -> dict[str, Any]:
    counts = Counter(tag.value for _, _, tag in mesh.boundary_edges)

    return {
        "nodes": len(mesh.nodes),
        "triangles": len(mesh.triangles),
        "boundary_edges": len(mesh.boundary_edges),
        "in_edges": counts.get(BoundaryTag.IN.value, 0),
        "wall_edges": counts.get(BoundaryTag.WALL.value, 0),
        "out_edges": counts.get(BoundaryTag.OUT.value, 0),
        "area": float(np.sum(mesh.signed_areas)) if mesh.triangles else 0.0,
    }
