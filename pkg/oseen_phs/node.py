"""
Port-Hamiltonian view of the assembled Oseen problem: energy, dissipation, supply and outputs.
"""

from typing import Optional, Union

import numpy as np
import scipy.sparse as sp

from oseen_phs.assembly import Convection, assemble_forms, build_dofmap, consistent_boundary_flux, dirichlet_lifting
from oseen_phs.convection import TangentialField, check_tangential
from oseen_phs.const import DEFAULT_TOL, TRACE_TOL
from oseen_phs.linalg import block_rhs, solve_saddle
from oseen_phs.utils.errors import CompatibilityError, DimensionError
from oseen_phs.type import (
    BoundaryTag,
    DiscreteOseenNode,
    FlowState,
    Mesh,
    PortOutput,
    SaddleSystem,
    SolverBackend,
    SparseMatrix,
)


def build_node(mesh: Mesh, mu: float, rho: float, c: float = 0.0, convection: Convection = None) -> DiscreteOseenNode:
    """
    Assembles the node of one mesh and parameter set.
    Args:
        mesh (Mesh): A valid mesh with non-empty In and Out boundaries.
        mu (float): Dynamic viscosity, mu >= 0.
        rho (float): Density, rho > 0.
        c (float): Reaction coefficient, c >= 0.
        convection (Convection): Stationary convection field; generated tangential fields are
            checked on the boundary (violations are logged).
    Returns:
        DiscreteOseenNode: The node.
    """

    if mu < 0 or rho <= 0 or c < 0:
        raise DimensionError(f"invalid parameters mu={mu}, rho={rho}, c={c}")
    if isinstance(convection, TangentialField):
        check_tangential(mesh, convection)

    forms = assemble_forms(mesh, mu, rho, c, convection)

    return DiscreteOseenNode(mesh=mesh, forms=forms, dofmap=build_dofmap(mesh), convection=convection)


def _check_state(node: DiscreteOseenNode, state: FlowState) -> None:
    if state.p.shape != (node.num_velocity,):
        raise DimensionError(f"momentum has shape {state.p.shape}, expected ({node.num_velocity},)")
    if state.P.shape != (node.num_pressure,):
        raise DimensionError(f"pressure has shape {state.P.shape}, expected ({node.num_pressure},)")


def _check_trace(vector: np.ndarray, size: int, name: str) -> np.ndarray:
    vector = np.asarray(vector, dtype=float)
    if vector.shape != (size,):
        raise DimensionError(f"{name} has shape {vector.shape}, expected ({size},)")
    return vector


def hamiltonian(node: DiscreteOseenNode, state: FlowState) -> float:
    """Kinetic energy H = p^T Mass p / (2 rho)."""
    _check_state(node, state)
    return float(state.p @ (node.forms.mass @ state.p)) / (2.0 * node.rho)


def dissipation_rate(node: DiscreteOseenNode, state: Union[FlowState, np.ndarray]) -> float:
    """
    Interior power loss -mu ||grad v||^2 - c ||v||^2 of a state (or of a velocity vector).
    """
    v = state.velocity(node.rho) if isinstance(state, FlowState) else np.asarray(state, dtype=float)
    f = node.forms
    return float(-f.mu * (v @ (f.stiff @ v)) - f.c * (v @ (f.mass @ v)))


def port_output(
    node: DiscreteOseenNode, state: FlowState, momentum_rate: Optional[np.ndarray] = None
) -> PortOutput:
    """
    Collocated outputs of a state: the consistent stress functional on the In trace and the
    velocity trace on the Out boundary.
    Args:
        node (DiscreteOseenNode): The node the state belongs to.
        state (FlowState): A solved state (pressure consistent with the momentum balance).
        momentum_rate (np.ndarray, optional): dp/dt of that solve; None for steady states.
    Returns:
        PortOutput: (y_sigma, y_v).
    """

    _check_state(node, state)
    y_sigma = consistent_boundary_flux(node.forms, node.dofmap, state, BoundaryTag.IN, momentum_rate)
    y_v = state.velocity(node.rho)[node.dofmap.out_dofs]

    return PortOutput(y_sigma=y_sigma, y_v=y_v)


def supply_terms(
    node: DiscreteOseenNode, output: PortOutput, u_v: np.ndarray, u_sigma: np.ndarray
) -> tuple[float, float]:
    """Boundary powers <y_sigma, u_v> on In (plain dot product) and <y_v, u_sigma> on Out (trace mass)."""
    u_v = _check_trace(u_v, len(node.dofmap.in_dofs), "u_v")
    u_sigma = _check_trace(u_sigma, len(node.dofmap.out_dofs), "u_sigma")
    y_sigma = _check_trace(output.y_sigma, len(node.dofmap.in_dofs), "y_sigma")
    y_v = _check_trace(output.y_v, len(node.dofmap.out_dofs), "y_v")

    return float(y_sigma @ u_v), float(y_v @ (node.forms.trace_mass_out @ u_sigma))


def supply_rate(node: DiscreteOseenNode, output: PortOutput, u_v: np.ndarray, u_sigma: np.ndarray) -> float:
    supply_in, supply_out = supply_terms(node, output, u_v, u_sigma)
    return supply_in + supply_out


def verify_dissipativity(node: DiscreteOseenNode, state: FlowState, atol: float = 1e-12) -> float:
    """
    Evaluates v^T (-mu Stiff + rho Adv - c Mass) v on a state with homogeneous Dirichlet data.
    The advection part cancels, so the value equals the dissipation rate and is never positive.
    Raises:
        CompatibilityError: If the velocity does not vanish on the In and Wall dofs.
    """

    _check_state(node, state)
    v = state.velocity(node.rho)
    boundary = np.abs(v[node.dofmap.dirichlet_dofs])
    if boundary.size and boundary.max() > atol * max(1.0, float(np.abs(v).max())):
        raise CompatibilityError(f"state has nonzero Dirichlet trace (max |v| = {boundary.max():.3e})")

    return float(v @ (node.generator @ v))


def apply_dynamics(
    node: DiscreteOseenNode, state: FlowState, u_v: np.ndarray, u_sigma: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """
    Right-hand side of the weak momentum balance Mass dp/dt = r on the free dofs.
    Args:
        node (DiscreteOseenNode): The node.
        state (FlowState): Momentum and pressure.
        u_v (np.ndarray): Inflow trace values at the state's time.
        u_sigma (np.ndarray): Outflow stress values at the state's time.
    Returns:
        tuple[np.ndarray, np.ndarray]: r restricted to the free dofs with
            r = -mu Stiff v + rho Adv v - c Mass v - Div^T P + Neumann load, and Div v.
    Raises:
        CompatibilityError: If u_v has corner data or the velocity trace on In and Wall differs from its lifting.
    """

    _check_state(node, state)
    dirichlet = node.dofmap.dirichlet_dofs
    lifting = dirichlet_lifting(node.dofmap, u_v)
    u_sigma = _check_trace(u_sigma, len(node.dofmap.out_dofs), "u_sigma")

    v = state.velocity(node.rho)
    gap = float(np.abs(v[dirichlet] - lifting[dirichlet]).max(initial=0.0))
    if gap > TRACE_TOL * max(1.0, float(np.abs(lifting).max(initial=0.0))):
        raise CompatibilityError(f"velocity trace differs from the inflow data and no-slip walls by {gap:.3e}")

    r = node.generator @ v - node.forms.div.T @ state.P + node.forms.neumann @ u_sigma

    return r[node.dofmap.free_dofs], node.forms.div @ v


def structure_matrices(node: DiscreteOseenNode) -> tuple[SparseMatrix, SparseMatrix]:
    """Skew part J = rho Adv and dissipative part R = mu Stiff + c Mass on the free dofs."""
    free = node.dofmap.free_dofs
    f = node.forms
    j = sp.csr_matrix((f.rho * f.adv)[free][:, free])
    r = sp.csr_matrix((f.mu * f.stiff + f.c * f.mass)[free][:, free])
    return j, r


def pressure_schur(node: DiscreteOseenNode, sigma: float, mu: float) -> SparseMatrix:
    """
    Pressure-mass approximation of the Schur complement of A = sigma Mass + mu Stiff (+ skew part).
    The viscous part of A contributes Mass_p / mu, the mass part roughly Mass_p / (sigma h^2).
    Args:
        node (DiscreteOseenNode): The node.
        sigma (float): Coefficient of the velocity mass matrix in A.
        mu (float): Coefficient of the stiffness matrix in A.
    Returns:
        SparseMatrix: SPD matrix of size num_pressure, used by the GMRES preconditioner.
    """

    scale = mu + sigma * node.mesh.max_edge_length**2
    return sp.csr_matrix(node.forms.pressure_mass / (scale if scale > 0.0 else 1.0))


def project_divergence_free(
    node: DiscreteOseenNode, v: np.ndarray, tol: float = DEFAULT_TOL, backend: SolverBackend = "lu"
) -> np.ndarray:
    """
    Mass-orthogonal projection onto discretely divergence-free velocities with zero Dirichlet data.
    Args:
        node (DiscreteOseenNode): The node.
        v (np.ndarray): Any velocity vector; its Dirichlet entries are discarded.
    Returns:
        np.ndarray: w minimizing (w - v)^T Mass (w - v) subject to Div w = 0, w = 0 on In and Wall.
    """

    v = _check_trace(v, node.num_velocity, "velocity")
    free = node.dofmap.free_dofs
    rhs = block_rhs(node.mass_ff @ v[free], np.zeros(node.num_pressure))
    schur = pressure_schur(node, sigma=1.0, mu=0.0)
    system = SaddleSystem(a=node.mass_ff, bt=sp.csr_matrix(node.div_f.T), rhs=rhs, free=free, schur=schur)
    solution, _, _ = solve_saddle(system, tol, backend)

    w = np.zeros(node.num_velocity)
    w[free] = solution[: len(free)]

    return w


def random_divergence_free_state(
    node: DiscreteOseenNode, rng: np.random.Generator, amplitude: float = 1.0
) -> FlowState:
    """Random admissible initial state: projected Gaussian velocity scaled to max |v| = amplitude."""
    w = project_divergence_free(node, rng.standard_normal(node.num_velocity))
    peak = float(np.abs(w).max())
    if peak > 0.0:
        w *= amplitude / peak

    return FlowState(p=node.rho * w, P=np.zeros(node.num_pressure), t=0.0)
