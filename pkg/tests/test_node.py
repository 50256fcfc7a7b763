import numpy as np
import pytest

from oseen_phs.convection import generate_tangential_field
from oseen_phs.node import apply_dynamics, build_node, dissipation_rate, hamiltonian, port_output
from oseen_phs.node import pressure_schur, project_divergence_free, random_divergence_free_state, structure_matrices
from oseen_phs.node import supply_rate, supply_terms, verify_dissipativity
from oseen_phs.utils.errors import CompatibilityError, DimensionError
from oseen_phs.utils.logger import logger
from oseen_phs.type import FlowState


def test_build_node(channel):
    node = build_node(channel, mu=0.5, rho=2.0, c=0.25)

    assert (node.mu, node.rho, node.c) == (0.5, 2.0, 0.25)
    assert node.num_velocity == 90
    assert node.num_pressure == 15
    assert node.mass_ff.shape == (48, 48)
    assert node.div_f.shape == (15, 48)
    assert node.neumann_f.shape == (48, 10)


@pytest.mark.parametrize("mu, rho, c", [(-1.0, 1.0, 0.0), (1.0, 0.0, 0.0), (1.0, 1.0, -0.5)])
def test_build_node_rejects_parameters(channel, mu, rho, c):
    with pytest.raises(DimensionError):
        build_node(channel, mu=mu, rho=rho, c=c)


def test_build_node_logs_normal_flow(channel, monkeypatch):
    messages = []
    monkeypatch.setattr(logger, "warning", lambda message, *args: messages.append(message))

    build_node(channel, mu=1.0, rho=1.0, convection=generate_tangential_field(channel, "x"))

    assert len(messages) == 1
    assert "|b.n|" in messages[0]


def test_hamiltonian(unit_square):
    node = build_node(unit_square, mu=1.0, rho=2.0)
    v = np.concatenate([np.ones(unit_square.num_nodes), np.zeros(unit_square.num_nodes)])

    assert np.isclose(hamiltonian(node, FlowState(p=2.0 * v, P=np.zeros(node.num_pressure))), 1.0)


@pytest.mark.parametrize("alpha", [-2.0, 0.5, 3.0])
def test_hamiltonian_is_quadratic(stokes_node, random_state, alpha):
    scaled = FlowState(p=alpha * random_state.p, P=random_state.P)

    assert hamiltonian(stokes_node, scaled) == pytest.approx(alpha**2 * hamiltonian(stokes_node, random_state))


def test_hamiltonian_vanishes_only_at_zero(stokes_node, rng):
    zero = FlowState.zero(stokes_node.num_velocity, stokes_node.num_pressure)
    assert hamiltonian(stokes_node, zero) == 0.0

    for _ in range(5):
        p = rng.standard_normal(stokes_node.num_velocity)
        assert hamiltonian(stokes_node, FlowState(p=p, P=zero.P)) > 0.0

    single = np.zeros(stokes_node.num_velocity)
    single[-1] = 1e-3
    assert hamiltonian(stokes_node, FlowState(p=single, P=zero.P)) > 0.0


def test_hamiltonian_rejects_wrong_state(stokes_node):
    with pytest.raises(DimensionError):
        hamiltonian(stokes_node, FlowState.zero(3, stokes_node.num_pressure))


def test_dissipation_rate(stokes_node, random_state):
    v = random_state.velocity(stokes_node.rho)
    rate = dissipation_rate(stokes_node, random_state)

    assert rate < 0
    assert np.isclose(rate, -(v @ stokes_node.forms.stiff @ v))
    assert rate == dissipation_rate(stokes_node, v)


def test_dissipativity_with_convection(vortex_node, rng):
    state = random_divergence_free_state(vortex_node, rng)

    value = verify_dissipativity(vortex_node, state)

    assert value < 0
    assert np.isclose(value, dissipation_rate(vortex_node, state), rtol=1e-12, atol=1e-14)


def test_conservative_node_has_no_dissipation(channel, rng):
    node = build_node(channel, mu=0.0, rho=1.0, convection=generate_tangential_field(channel, "vortex", 2.0))
    state = random_divergence_free_state(node, rng)

    assert abs(verify_dissipativity(node, state)) < 1e-13


def test_dissipativity_needs_homogeneous_trace(poiseuille, stokes_node):
    with pytest.raises(CompatibilityError):
        verify_dissipativity(stokes_node, poiseuille.state)


def test_structure_matrices(vortex_node):
    j, r = structure_matrices(vortex_node)

    assert abs(j + j.T).max() == 0.0
    assert abs(r - r.T).max() < 1e-12
    assert np.linalg.eigvalsh(r.toarray()).min() > -1e-12


def test_apply_dynamics_at_steady_flow(stokes_node, poiseuille):
    r, divergence = apply_dynamics(stokes_node, poiseuille.state, poiseuille.u_v, poiseuille.u_sigma)

    assert r.shape == (48,)
    assert np.abs(r).max() < 1e-10
    assert np.abs(divergence).max() < 1e-12


def test_apply_dynamics_rejects_corner_data(stokes_node, poiseuille):
    with pytest.raises(CompatibilityError):
        apply_dynamics(stokes_node, poiseuille.state, np.ones_like(poiseuille.u_v), poiseuille.u_sigma)


@pytest.mark.parametrize("factor", [0.5, 0.0])
def test_apply_dynamics_rejects_trace_mismatch(stokes_node, poiseuille, factor):
    with pytest.raises(CompatibilityError):
        apply_dynamics(stokes_node, poiseuille.state, factor * poiseuille.u_v, poiseuille.u_sigma)


def test_apply_dynamics_rejects_wall_slip(stokes_node, poiseuille):
    p = poiseuille.state.p.copy()
    p[stokes_node.dofmap.wall_dofs[0]] = 1e-3
    state = FlowState(p=p, P=poiseuille.state.P)

    with pytest.raises(CompatibilityError):
        apply_dynamics(stokes_node, state, poiseuille.u_v, poiseuille.u_sigma)


def test_steady_supply_balances_dissipation(stokes_node, poiseuille):
    output = port_output(stokes_node, poiseuille.state)
    supply_in, supply_out = supply_terms(stokes_node, output, poiseuille.u_v, poiseuille.u_sigma)

    assert output.y_sigma.shape == poiseuille.u_v.shape
    assert np.allclose(output.y_v, poiseuille.state.p[stokes_node.dofmap.out_dofs])
    assert supply_in == pytest.approx(32.0 / 3.0, rel=1e-10)
    assert supply_out == 0.0
    assert supply_in + dissipation_rate(stokes_node, poiseuille.state) == pytest.approx(0.0, abs=1e-9)


def test_supply_rate_rejects_wrong_inputs(stokes_node, poiseuille):
    output = port_output(stokes_node, poiseuille.state)

    with pytest.raises(DimensionError):
        supply_rate(stokes_node, output, poiseuille.u_v[:-1], poiseuille.u_sigma)


def test_projection(stokes_node, rng):
    w = project_divergence_free(stokes_node, rng.standard_normal(stokes_node.num_velocity))

    assert np.abs(stokes_node.forms.div @ w).max() < 1e-12
    assert np.all(w[stokes_node.dofmap.dirichlet_dofs] == 0.0)
    assert np.allclose(project_divergence_free(stokes_node, w), w, atol=1e-12)


def test_pressure_schur(stokes_node):
    pressure_mass = stokes_node.forms.pressure_mass.toarray()
    h = stokes_node.mesh.max_edge_length

    assert np.allclose(pressure_schur(stokes_node, sigma=0.0, mu=1.0).toarray(), pressure_mass)
    assert np.allclose(pressure_schur(stokes_node, sigma=0.0, mu=0.0).toarray(), pressure_mass)

    scaled = pressure_schur(stokes_node, sigma=40.0, mu=0.5).toarray()
    assert scaled.shape == (stokes_node.num_pressure, stokes_node.num_pressure)
    assert np.allclose(scaled * (0.5 + 40.0 * h**2), pressure_mass)
    assert np.linalg.eigvalsh(scaled).min() > 0.0


def test_random_state(stokes_node, rng):
    state = random_divergence_free_state(stokes_node, rng, amplitude=0.5)

    assert np.isclose(np.abs(state.p).max(), 0.5)
    assert np.all(state.P == 0.0)
    assert state.t == 0.0
