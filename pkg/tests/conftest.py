from typing import NamedTuple

import numpy as np
import pytest

from oseen_phs.convection import generate_tangential_field
from oseen_phs.mesh import build_channel_mesh
from oseen_phs.node import build_node, random_divergence_free_state
from oseen_phs.type import BoundarySignal, DiscreteOseenNode, FlowState, Mesh


@pytest.fixture
def unit_square() -> Mesh:
    return build_channel_mesh(1.0, 1.0, 2, 2)


@pytest.fixture
def two_triangles() -> Mesh:
    return build_channel_mesh(1.0, 1.0, 1, 1)


@pytest.fixture
def channel() -> Mesh:
    return build_channel_mesh(2.0, 1.0, 4, 2)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture
def stokes_node(channel):
    return build_node(channel, mu=1.0, rho=1.0)


@pytest.fixture
def vortex_node(channel):
    return build_node(channel, mu=1.0, rho=1.0, convection=generate_tangential_field(channel, "vortex", 2.0))


@pytest.fixture
def random_state(stokes_node, rng):
    return random_divergence_free_state(stokes_node, rng)


class Poiseuille(NamedTuple):
    state: FlowState
    u_v: np.ndarray
    u_sigma: np.ndarray
    signal: BoundarySignal


def poiseuille_flow(node: DiscreteOseenNode, peak: float = 1.0) -> Poiseuille:
    """Exact parabolic channel flow (zero outflow stress) interpolated on the node's mesh."""
    mesh = node.mesh
    length, height = mesh.points.max(axis=0)
    x, y = mesh.quadratic_points[:, 0], mesh.quadratic_points[:, 1]
    v = np.concatenate([4.0 * peak * y * (height - y) / height**2, np.zeros(mesh.num_nodes)])
    pressure = 8.0 * node.mu * peak / height**2 * (length - mesh.points[:, 0])

    u_v = v[node.dofmap.in_dofs]
    u_sigma = np.zeros(len(node.dofmap.out_dofs))
    state = FlowState(p=node.rho * v, P=pressure, t=0.0)

    return Poiseuille(state, u_v, u_sigma, BoundarySignal.constant(u_v, u_sigma))


@pytest.fixture
def poiseuille(stokes_node) -> Poiseuille:
    return poiseuille_flow(stokes_node)
