"""
Dense reference solutions on small meshes: the divergence-free reduction of the node and the
variation-of-constants formula of the reduced evolution.
"""

from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp
from scipy.linalg import eigvals, expm, qr

from oseen_phs.const import DENSE_LIMIT, RANK_TOL
from oseen_phs.integrate import steady_solve
from oseen_phs.utils.errors import ConvergenceError, DimensionError
from oseen_phs.type import DiscreteOseenNode, ReducedSystem


QUADRATURE_TOL = 1e-11
MAX_REFINEMENTS = 20


def divfree_basis(div_free: np.ndarray) -> np.ndarray:
    """
    Orthonormal basis of the kernel of the divergence restricted to the free dofs.
    Args:
        div_free (np.ndarray): Dense (or sparse) n_p x n_free matrix.
    Returns:
        np.ndarray: n_free x k matrix Z with orthonormal columns and Div Z = 0.
    Raises:
        DimensionError: If there are more free dofs than the dense limit.
    """

    matrix = div_free.toarray() if sp.issparse(div_free) else np.asarray(div_free, dtype=float)
    num_constraints, num_free = matrix.shape
    if num_free > DENSE_LIMIT:
        raise DimensionError(f"{num_free} free dofs exceed the dense limit of {DENSE_LIMIT}")
    if num_constraints == 0 or num_free == 0:
        return np.eye(num_free)

    q, r, _ = qr(matrix.T, pivoting=True)
    diagonal = np.abs(np.diag(r))
    rank = int(np.sum(diagonal > RANK_TOL * diagonal[0])) if diagonal.size and diagonal[0] > 0 else 0

    return q[:, rank:]


def reduce_node(node: DiscreteOseenNode, u_v: Optional[np.ndarray] = None) -> ReducedSystem:
    """
    Builds the dense reduced system of a node.
    Args:
        node (DiscreteOseenNode): A node with at most DENSE_LIMIT free dofs.
        u_v (np.ndarray, optional): Time-constant inflow data; the reduced state then measures
            the deviation from the steady solution for that data.
    Returns:
        ReducedSystem: Basis, reduced mass, generator and Neumann input map.
    """

    free = node.dofmap.free_dofs
    basis = divfree_basis(node.div_f)

    mass = basis.T @ (node.mass_ff @ basis)
    generator = basis.T @ (node.generator_ff @ basis)
    input_map = basis.T @ node.neumann_f.toarray()

    offset = np.zeros(node.num_velocity)
    if u_v is not None and np.any(np.asarray(u_v) != 0.0):
        zero_stress = np.zeros(len(node.dofmap.out_dofs))
        offset = steady_solve(node, u_v, zero_stress).velocity(node.rho)

    return ReducedSystem(
        basis=basis,
        mass=0.5 * (mass + mass.T),
        generator=generator,
        input_map=input_map,
        rho=node.rho,
        free=free,
        offset=offset,
    )


def to_reduced(red: ReducedSystem, v: np.ndarray) -> np.ndarray:
    """Coordinates of a velocity in the reduced basis, relative to the steady offset."""
    v = np.asarray(v, dtype=float)
    deviation = v - red.offset if red.offset is not None else v
    return red.basis.T @ deviation[red.free]


def from_reduced(red: ReducedSystem, x: np.ndarray) -> np.ndarray:
    v = np.array(red.offset, dtype=float)
    v[red.free] += red.basis @ x
    return v


def _simpson(a: np.ndarray, b: np.ndarray, u: Callable[[float], np.ndarray], t: float, intervals: int) -> np.ndarray:
    h = t / intervals
    step = expm(h * a)
    total = np.zeros(a.shape[0])
    # Horner accumulation of sum_j w_j exp((t - tau_j) A) B u(tau_j)
    for j in range(intervals + 1):
        weight = 1.0 if j in (0, intervals) else (4.0 if j % 2 else 2.0)
        total = step @ total + weight * (b @ np.asarray(u(j * h), dtype=float))
    return total * (h / 3.0)


def mild_solution(
    red: ReducedSystem, x0: np.ndarray, u_sigma: Callable[[float], np.ndarray], t: float, dt: float = 1e-2
) -> np.ndarray:
    """
    Evaluates x(t) = exp(tA) x0 + int_0^t exp((t - s)A) B u_sigma(s) ds.
    The integral uses composite Simpson on steps of at most `dt`, halved until two successive
    values differ by less than 1e-11 (relative to max(1, |x|)).
    Args:
        red (ReducedSystem): The reduced system.
        x0 (np.ndarray): Initial reduced state.
        u_sigma (Callable[[float], np.ndarray]): Outflow stress trace as a function of time.
        t (float): Evaluation time, t >= 0.
        dt (float): Initial quadrature step.
    Returns:
        np.ndarray: The reduced state at time t.
    Raises:
        ConvergenceError: If the quadrature does not settle.
    """

    if t < 0:
        raise DimensionError(f"evaluation time must be nonnegative, got {t}")

    a, b = red.dynamics
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (red.size,):
        raise DimensionError(f"reduced state has shape {x0.shape}, expected ({red.size},)")

    homogeneous = expm(t * a) @ x0
    if t == 0.0 or red.size == 0:
        return homogeneous

    intervals = max(2, 2 * int(np.ceil(t / (2.0 * dt))))
    previous = _simpson(a, b, u_sigma, t, intervals)
    for level in range(1, MAX_REFINEMENTS + 1):
        intervals *= 2
        current = _simpson(a, b, u_sigma, t, intervals)
        if np.linalg.norm(current - previous) < QUADRATURE_TOL * max(1.0, float(np.linalg.norm(homogeneous + current))):
            return homogeneous + current
        previous = current

    raise ConvergenceError("Simpson refinement of the input integral did not settle", iterations=MAX_REFINEMENTS)


def energy_norm(red: ReducedSystem, x: np.ndarray) -> float:
    return float(np.sqrt(max(x @ (red.mass @ x), 0.0)))


def semigroup_contractivity_check(red: ReducedSystem, samples: int = 10, seed: int = 0) -> float:
    """
    Largest growth |x(t)|_M / |x0|_M over random x0 and times t in (0, 1] of the unforced flow.
    Returns:
        float: The growth factor; at most 1 for a dissipative node.
    """

    if samples < 1:
        raise DimensionError(f"samples must be positive, got {samples}")
    if red.size == 0:
        return 1.0

    a, _ = red.dynamics
    rng = np.random.default_rng(seed)
    factor = 0.0
    for _ in range(samples):
        x0 = rng.standard_normal(red.size)
        t = 1.0 - rng.random()
        factor = max(factor, energy_norm(red, expm(t * a) @ x0) / energy_norm(red, x0))

    return factor


def spectral_abscissa(red: ReducedSystem) -> float:
    """Largest real part of the eigenvalues of the reduced generator."""
    if red.size == 0:
        return float("-inf")
    return float(np.max(eigvals(red.generator, red.rho * red.mass).real))


def reduced_structure(red: ReducedSystem) -> tuple[np.ndarray, np.ndarray]:
    """Skew part J and dissipative part R (symmetric PSD) with generator = J - R."""
    g = red.generator
    return 0.5 * (g - g.T), -0.5 * (g + g.T)
