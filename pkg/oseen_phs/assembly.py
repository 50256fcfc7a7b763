"""
Taylor-Hood assembly: continuous quadratic velocity, continuous linear pressure.

Element loops are vectorized over all triangles; element matrices are scattered into CSR
matrices through COO triplets (duplicates summed).
"""

from threading import Lock
from typing import Callable, NamedTuple, Optional, Union

import numpy as np
import scipy.sparse as sp
from cachetools import LRUCache, cached

from oseen_phs.const import FORMS_ASSEMBLED
from oseen_phs.convection import VectorField
from oseen_phs.mesh import validate_mesh
from oseen_phs.quadrature import interval_rule, triangle_rule
from oseen_phs.utils.errors import CompatibilityError, DimensionError, MeshError
from oseen_phs.utils.logger import logger
from oseen_phs.type import AssembledForms, BoundaryTag, DofMap, FlowState, Mesh, SparseMatrix


Convection = Union[None, np.ndarray, VectorField]

BILINEAR_DEGREE = 4
ADVECTION_DEGREE = 5

# barycentric gradients on the reference triangle
_DLAMBDA = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])
_EDGES = ((0, 1), (1, 2), (2, 0))


class ReferenceTables(NamedTuple):
    weights: np.ndarray
    points: np.ndarray
    p2: np.ndarray
    p2_grad: np.ndarray
    p1: np.ndarray


def p2_basis(points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Values (nq, 6) and reference gradients (nq, 6, 2) of the quadratic Lagrange basis."""
    xi, eta = points[:, 0], points[:, 1]
    lam = np.column_stack([1.0 - xi - eta, xi, eta])

    values = np.empty((len(points), 6))
    grads = np.empty((len(points), 6, 2))
    for i in range(3):
        values[:, i] = lam[:, i] * (2.0 * lam[:, i] - 1.0)
        grads[:, i, :] = np.outer(4.0 * lam[:, i] - 1.0, _DLAMBDA[i])
    for k, (a, b) in enumerate(_EDGES):
        values[:, 3 + k] = 4.0 * lam[:, a] * lam[:, b]
        grads[:, 3 + k, :] = 4.0 * (np.outer(lam[:, a], _DLAMBDA[b]) + np.outer(lam[:, b], _DLAMBDA[a]))

    return values, grads


@cached(cache=LRUCache(maxsize=16), lock=Lock())
def reference_tables(degree: int) -> ReferenceTables:
    rule = triangle_rule(degree)
    p2, p2_grad = p2_basis(rule.points)
    p1 = np.column_stack([1.0 - rule.points[:, 0] - rule.points[:, 1], rule.points[:, 0], rule.points[:, 1]])

    return ReferenceTables(rule.weights, rule.points, p2, p2_grad, p1)


class Geometry(NamedTuple):
    area: np.ndarray
    origin: np.ndarray
    jacobian: np.ndarray
    grads: np.ndarray


def element_geometry(mesh: Mesh, tables: ReferenceTables) -> Geometry:
    """Affine maps of all triangles and physical basis gradients (n_cells, nq, 6, 2)."""
    p = mesh.points[mesh.cells]
    jac = np.stack([p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]], axis=2)
    det = jac[:, 0, 0] * jac[:, 1, 1] - jac[:, 0, 1] * jac[:, 1, 0]
    inv_t = np.empty_like(jac)
    inv_t[:, 0, 0] = jac[:, 1, 1] / det
    inv_t[:, 0, 1] = -jac[:, 1, 0] / det
    inv_t[:, 1, 0] = -jac[:, 0, 1] / det
    inv_t[:, 1, 1] = jac[:, 0, 0] / det
    grads = np.einsum("cab,qib->cqia", inv_t, tables.p2_grad)

    return Geometry(0.5 * det, p[:, 0], jac, grads)


def physical_points(geometry: Geometry, tables: ReferenceTables) -> tuple[np.ndarray, np.ndarray]:
    xy = geometry.origin[:, None, :] + np.einsum("cab,qb->cqa", geometry.jacobian, tables.points)
    return xy[..., 0], xy[..., 1]


def _scatter(rows: np.ndarray, cols: np.ndarray, local: np.ndarray, shape: tuple[int, int]) -> SparseMatrix:
    r = np.repeat(rows[:, :, None], cols.shape[1], axis=2)
    c = np.repeat(cols[:, None, :], rows.shape[1], axis=1)
    return sp.csr_matrix(sp.coo_matrix((local.ravel(), (r.ravel(), c.ravel())), shape=shape))


def _vector(scalar: SparseMatrix) -> SparseMatrix:
    return sp.csr_matrix(sp.block_diag([scalar, scalar], format="csr"))


def assemble_mass(mesh: Mesh) -> SparseMatrix:
    """
    Velocity mass matrix, the Gram matrix of the L2 inner product (exact, degree-4 rule).
    Args:
        mesh (Mesh): A valid mesh.
    Returns:
        SparseMatrix: SPD matrix of size 2 * num_nodes.
    """

    tables = reference_tables(BILINEAR_DEGREE)
    area = np.abs(mesh.signed_areas)
    reference = np.einsum("q,qi,qj->ij", tables.weights, tables.p2, tables.p2)
    local = area[:, None, None] * reference[None]
    nodes = mesh.quadratic_cells

    return _vector(_scatter(nodes, nodes, local, (mesh.num_nodes, mesh.num_nodes)))


def assemble_stiffness(mesh: Mesh) -> SparseMatrix:
    """Vector Laplacian matrix, entries int grad(phi) : grad(psi); symmetric PSD."""

    tables = reference_tables(BILINEAR_DEGREE)
    geometry = element_geometry(mesh, tables)
    local = np.einsum("c,q,cqia,cqja->cij", geometry.area, tables.weights, geometry.grads, geometry.grads)
    nodes = mesh.quadratic_cells

    return _vector(_scatter(nodes, nodes, local, (mesh.num_nodes, mesh.num_nodes)))


def evaluate_convection(
    mesh: Mesh, b: Convection, geometry: Geometry, tables: ReferenceTables
) -> tuple[np.ndarray, np.ndarray]:
    """Convection components at the physical quadrature points, shape (n_cells, nq) each."""
    if b is None:
        zeros = np.zeros((len(mesh.triangles), len(tables.weights)))
        return zeros, zeros

    if isinstance(b, np.ndarray):
        if b.shape != (2 * mesh.num_nodes,):
            raise DimensionError(f"convection coefficients have shape {b.shape}, expected ({2 * mesh.num_nodes},)")
        nodes = mesh.quadratic_cells
        bx = np.einsum("qi,ci->cq", tables.p2, b[: mesh.num_nodes][nodes])
        by = np.einsum("qi,ci->cq", tables.p2, b[mesh.num_nodes :][nodes])
        return bx, by

    x, y = physical_points(geometry, tables)
    bx, by = b(x, y)
    return np.broadcast_to(bx, x.shape), np.broadcast_to(by, x.shape)


def assemble_advection(mesh: Mesh, b: Convection, degree: int = ADVECTION_DEGREE) -> SparseMatrix:
    """
    Skew-symmetrized advection matrix 1/2 [<phi_i, (b.grad) phi_j> - <phi_j, (b.grad) phi_i>].
    Args:
        mesh (Mesh): A valid mesh.
        b (Convection): None, quadratic velocity coefficients, or a callable b(x, y) -> (bx, by).
        degree (int): Quadrature degree of the non-symmetric form.
    Returns:
        SparseMatrix: Exactly skew-symmetric matrix; the density is applied by the caller.
    """

    n = mesh.num_nodes
    if b is None:
        return sp.csr_matrix((2 * n, 2 * n))

    tables = reference_tables(degree)
    geometry = element_geometry(mesh, tables)
    bx, by = evaluate_convection(mesh, b, geometry, tables)
    transport = bx[:, :, None] * geometry.grads[..., 0] + by[:, :, None] * geometry.grads[..., 1]
    local = np.einsum("c,q,qi,cqj->cij", geometry.area, tables.weights, tables.p2, transport)
    nodes = mesh.quadratic_cells
    scalar = _scatter(nodes, nodes, local, (n, n))

    return _vector(sp.csr_matrix(0.5 * (scalar - scalar.T)))


def assemble_divergence(mesh: Mesh) -> SparseMatrix:
    """Matrix of -<q, div v> with linear q (rows, vertices) and quadratic v (columns)."""

    tables = reference_tables(BILINEAR_DEGREE)
    geometry = element_geometry(mesh, tables)
    bx = np.einsum("c,q,qk,cqj->ckj", geometry.area, tables.weights, tables.p1, geometry.grads[..., 0])
    by = np.einsum("c,q,qk,cqj->ckj", geometry.area, tables.weights, tables.p1, geometry.grads[..., 1])
    shape = (mesh.num_vertices, mesh.num_nodes)
    dx = _scatter(mesh.cells, mesh.quadratic_cells, bx, shape)
    dy = _scatter(mesh.cells, mesh.quadratic_cells, by, shape)

    return sp.csr_matrix(-sp.hstack([dx, dy], format="csr"))


def assemble_pressure_mass(mesh: Mesh) -> SparseMatrix:
    tables = reference_tables(BILINEAR_DEGREE)
    reference = np.einsum("q,qi,qj->ij", tables.weights, tables.p1, tables.p1)
    local = np.abs(mesh.signed_areas)[:, None, None] * reference[None]

    return _scatter(mesh.cells, mesh.cells, local, (mesh.num_vertices, mesh.num_vertices))


def _edge_nodes(mesh: Mesh, tag: BoundaryTag) -> np.ndarray:
    """(i, j, midpoint) node triples of the edges carrying `tag`."""
    triples = [(i, j, mesh.midpoint_of(i, j)) for i, j in mesh.edges_with_tag(tag)]
    return np.array(triples, dtype=np.int64).reshape(-1, 3)


def build_dofmap(mesh: Mesh) -> DofMap:
    """
    Splits the velocity dofs into In, Wall and free sets.
    Dofs on the closure of both In and Wall belong to In; Out corners on the wall are Wall dofs.
    """

    in_nodes = np.unique(_edge_nodes(mesh, BoundaryTag.IN))
    wall_all = np.unique(_edge_nodes(mesh, BoundaryTag.WALL))
    out_nodes = np.unique(_edge_nodes(mesh, BoundaryTag.OUT))

    return DofMap(
        num_nodes=mesh.num_nodes,
        num_pressure=mesh.num_vertices,
        in_nodes=in_nodes,
        wall_nodes=np.setdiff1d(wall_all, in_nodes),
        out_nodes=out_nodes,
        in_wall_nodes=np.intersect1d(in_nodes, wall_all),
    )


def _edge_shape(points: np.ndarray) -> np.ndarray:
    """Quadratic shape functions on [0, 1] for the nodes (start, end, midpoint)."""
    s = points
    return np.column_stack([(1.0 - s) * (1.0 - 2.0 * s), s * (2.0 * s - 1.0), 4.0 * s * (1.0 - s)])


def assemble_trace_mass(mesh: Mesh, dofmap: DofMap, tag: BoundaryTag) -> SparseMatrix:
    """Boundary mass matrix on the component-blocked trace vectors of `tag` (3-point Gauss)."""

    trace_nodes = dofmap.trace_nodes(tag)
    triples = _edge_nodes(mesh, tag)
    size = len(trace_nodes)
    if not len(triples):
        return sp.csr_matrix((2 * size, 2 * size))

    rule = interval_rule(3)
    shape = _edge_shape(rule.points)
    reference = np.einsum("q,qa,qb->ab", rule.weights, shape, shape)
    lengths = np.linalg.norm(mesh.quadratic_points[triples[:, 1]] - mesh.quadratic_points[triples[:, 0]], axis=1)
    local = lengths[:, None, None] * reference[None]
    positions = np.searchsorted(trace_nodes, triples)

    return _vector(_scatter(positions, positions, local, (size, size)))


def embedding(dofmap: DofMap, tag: BoundaryTag) -> SparseMatrix:
    """Sparse 0/1 matrix placing a trace vector of `tag` into a velocity vector."""
    dofs = dofmap.trace_dofs(tag)
    return sp.csr_matrix((np.ones(len(dofs)), (dofs, np.arange(len(dofs)))), shape=(dofmap.num_velocity, len(dofs)))


def assemble_neumann_load(mesh: Mesh, u_sigma: np.ndarray, dofmap: Optional[DofMap] = None) -> np.ndarray:
    """
    Natural boundary load of an Out stress density.
    Args:
        mesh (Mesh): A valid mesh.
        u_sigma (np.ndarray): Stress values at the Out trace nodes (component-blocked).
        dofmap (DofMap, optional): Reused when already built.
    Returns:
        np.ndarray: load_i = int_{Gamma_out} u_sigma . phi_i ds.
    """

    dofmap = dofmap or build_dofmap(mesh)
    u_sigma = np.asarray(u_sigma, dtype=float)
    if u_sigma.shape != (dofmap.trace_size(BoundaryTag.OUT),):
        raise DimensionError(f"u_sigma has shape {u_sigma.shape}, expected ({dofmap.trace_size(BoundaryTag.OUT)},)")

    load = np.zeros(dofmap.num_velocity)
    load[dofmap.out_dofs] = assemble_trace_mass(mesh, dofmap, BoundaryTag.OUT) @ u_sigma

    return load


def dirichlet_lifting(dofmap: DofMap, u_v: np.ndarray, atol: float = 0.0) -> np.ndarray:
    """
    Right inverse of the In trace: In dofs take `u_v`, every other dof is zero.
    Raises:
        CompatibilityError: If `u_v` is nonzero on the closure of the wall.
        DimensionError: If `u_v` does not match the In trace size.
    """

    u_v = np.asarray(u_v, dtype=float)
    if u_v.shape != (len(dofmap.in_dofs),):
        raise DimensionError(f"u_v has shape {u_v.shape}, expected ({len(dofmap.in_dofs)},)")

    corner = np.abs(u_v[dofmap.in_wall_trace])
    if corner.size and corner.max() > atol:
        raise CompatibilityError(f"inflow data must vanish where inflow meets wall (max |u_v| = {corner.max():.3e})")

    lifted = np.zeros(dofmap.num_velocity)
    lifted[dofmap.in_dofs] = u_v

    return lifted


def interpolate(mesh: Mesh, field: VectorField) -> np.ndarray:
    """Nodal interpolation of a closed-form vector field into velocity coefficients."""
    fx, fy = field(mesh.quadratic_points[:, 0], mesh.quadratic_points[:, 1])
    shape = (mesh.num_nodes,)
    return np.concatenate([np.broadcast_to(fx, shape), np.broadcast_to(fy, shape)]).astype(float)


def trace_values(mesh: Mesh, dofmap: DofMap, tag: BoundaryTag, field: VectorField) -> np.ndarray:
    """Samples a vector field at the trace nodes of `tag` into a component-blocked trace vector."""
    nodes = dofmap.trace_nodes(tag)
    fx, fy = field(mesh.quadratic_points[nodes, 0], mesh.quadratic_points[nodes, 1])
    shape = (len(nodes),)
    return np.concatenate([np.broadcast_to(fx, shape), np.broadcast_to(fy, shape)]).astype(float)


def outward_normals(mesh: Mesh, tag: BoundaryTag) -> tuple[np.ndarray, np.ndarray]:
    """Unit outward normals and lengths of the edges carrying `tag`."""
    edges = mesh.edges_with_tag(tag)
    if not edges:
        return np.zeros((0, 2)), np.zeros(0)

    owner: dict[tuple[int, int], int] = {}
    for cell, tri in enumerate(mesh.triangles):
        for a, b in _EDGES:
            owner[(min(tri[a], tri[b]), max(tri[a], tri[b]))] = tri[3 - a - b]

    normals, lengths = [], []
    for i, j in edges:
        tangent = mesh.points[j] - mesh.points[i]
        normal = np.array([tangent[1], -tangent[0]])
        if normal @ (mesh.points[owner[(min(i, j), max(i, j))]] - mesh.points[i]) > 0:
            normal = -normal
        length = float(np.linalg.norm(tangent))
        normals.append(normal / length)
        lengths.append(length)

    return np.array(normals), np.array(lengths)


def boundary_flux_rates(mesh: Mesh, v: np.ndarray) -> tuple[float, float]:
    """
    Net volume flux int v.n ds through the In and Out boundaries.
    For discretely divergence-free v with no-slip walls the two rates cancel.
    """

    rule = interval_rule(3)
    shape = _edge_shape(rule.points)
    n = mesh.num_nodes
    rates = []
    for tag in (BoundaryTag.IN, BoundaryTag.OUT):
        triples = _edge_nodes(mesh, tag)
        normals, lengths = outward_normals(mesh, tag)
        if not len(triples):
            rates.append(0.0)
            continue
        vx = shape @ v[:n][triples].T
        vy = shape @ v[n:][triples].T
        flux = rule.weights @ (vx * normals[:, 0] + vy * normals[:, 1])
        rates.append(float(np.sum(lengths * flux)))

    return rates[0], rates[1]


def assemble_forms(mesh: Mesh, mu: float, rho: float, c: float = 0.0, convection: Convection = None) -> AssembledForms:
    """
    Assembles every operator of the node for one mesh and parameter set.
    Raises:
        MeshError: If the mesh violates a domain rule (an empty Out set included).
    """

    violations = validate_mesh(mesh)
    if violations:
        raise MeshError("; ".join(str(v) for v in violations))

    dofmap = build_dofmap(mesh)
    trace_out = assemble_trace_mass(mesh, dofmap, BoundaryTag.OUT)
    forms = AssembledForms(
        mass=assemble_mass(mesh),
        stiff=assemble_stiffness(mesh),
        adv=assemble_advection(mesh, convection),
        div=assemble_divergence(mesh),
        pressure_mass=assemble_pressure_mass(mesh),
        trace_mass_in=assemble_trace_mass(mesh, dofmap, BoundaryTag.IN),
        trace_mass_out=trace_out,
        neumann=sp.csr_matrix(embedding(dofmap, BoundaryTag.OUT) @ trace_out),
        mu=mu,
        rho=rho,
        c=c,
    )
    logger.debug(FORMS_ASSEMBLED.format(dofmap.num_velocity, dofmap.num_pressure, len(dofmap.free_dofs)))

    return forms


def consistent_boundary_flux(
    forms: AssembledForms,
    dofmap: DofMap,
    state: FlowState,
    boundary: BoundaryTag,
    momentum_rate: Optional[np.ndarray] = None,
) -> np.ndarray:
    """
    Normal stress (mu grad v - P I) n on a boundary, extracted variationally.
    The value for every trace dof is the residual functional of the momentum balance tested
    with that basis function, so pairing it with a trace vector is a plain dot product.
    Args:
        forms (AssembledForms): Operators the state was computed with.
        dofmap (DofMap): Matching dof map.
        state (FlowState): Momentum and pressure of a solve with these forms.
        boundary (BoundaryTag): IN or OUT.
        momentum_rate (np.ndarray, optional): dp/dt of the solve; None for steady states.
    Returns:
        np.ndarray: Component-blocked functional values on the trace nodes of `boundary`.
    """

    v = state.p / forms.rho
    interior = -forms.mu * (forms.stiff @ v) + forms.rho * (forms.adv @ v) - forms.c * (forms.mass @ v)
    interior -= forms.div.T @ state.P
    dofs = dofmap.trace_dofs(boundary)
    flux = -interior[dofs]
    if momentum_rate is not None:
        flux += (forms.mass @ momentum_rate)[dofs]

    return flux
