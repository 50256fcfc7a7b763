"""
Implicit midpoint time stepping of the boundary-controlled saddle-point system, with an exact
discrete energy ledger, plus the steady, resolvent and initial-pressure solves.
"""

import math
from typing import Optional

import numpy as np
import scipy.sparse as sp
from cachetools import LRUCache, cachedmethod

from oseen_phs.assembly import consistent_boundary_flux, dirichlet_lifting
from oseen_phs.const import COMPATIBILITY_FAILED, DEFAULT_TOL, DIRICHLET_DRIFT, DIV_TOL, DRIFT_FACTOR
from oseen_phs.const import LEDGER_RESIDUAL_HIGH, LEDGER_TOL, SIMULATION_ABORTED, STEP_DONE, TRACE_TOL
from oseen_phs.linalg import SaddleFactorization, block_rhs, factorize_saddle
from oseen_phs.node import dissipation_rate, hamiltonian, pressure_schur
from oseen_phs.utils.errors import CompatibilityError, DimensionError, MeshError, OseenError, get_exception_msg
from oseen_phs.utils.logger import logger
from oseen_phs.utils.progress import progressify_sequence, should_report
from oseen_phs.type import (
    BoundarySignal,
    BoundaryTag,
    DiscreteOseenNode,
    FlowState,
    LedgerRow,
    SaddleSystem,
    SolveResult,
    SolverBackend,
    SolverStats,
    Trajectory,
    Violation,
)


def _saddle(
    node: DiscreteOseenNode, a: sp.spmatrix, sigma: float, mu: float, rhs: Optional[np.ndarray] = None
) -> SaddleSystem:
    """Saddle system with block A = `a` ~ sigma Mass + mu Stiff and a pressure-mass Schur surrogate."""
    rhs = block_rhs(np.zeros(len(node.dofmap.free_dofs)), np.zeros(node.num_pressure)) if rhs is None else rhs
    return SaddleSystem(
        a=sp.csr_matrix(a),
        bt=sp.csr_matrix(node.div_f.T),
        rhs=rhs,
        free=node.dofmap.free_dofs,
        schur=pressure_schur(node, sigma, mu),
    )


def _dirichlet_part(node: DiscreteOseenNode, u_v: np.ndarray) -> np.ndarray:
    """Dirichlet entries (ordered like `dirichlet_dofs`) of the lifting of `u_v`."""
    return dirichlet_lifting(node.dofmap, u_v)[node.dofmap.dirichlet_dofs]


def _assemble_velocity(node: DiscreteOseenNode, free_values: np.ndarray, dirichlet_values: np.ndarray) -> np.ndarray:
    v = np.zeros(node.num_velocity)
    v[node.dofmap.free_dofs] = free_values
    v[node.dofmap.dirichlet_dofs] = dirichlet_values
    return v


def _solve(
    factorization: SaddleFactorization,
    node: DiscreteOseenNode,
    rhs: np.ndarray,
    tol: float,
    stats: Optional[SolverStats],
) -> tuple[np.ndarray, np.ndarray]:
    result: SolveResult = factorization.solve(rhs, tol)
    if stats is not None:
        stats.record(result.residual, result.iterations)
    n = len(node.dofmap.free_dofs)
    return result.solution[:n], result.solution[n:]


def _pressure_and_rate(
    node: DiscreteOseenNode,
    state: FlowState,
    signal: BoundarySignal,
    tol: float = DEFAULT_TOL,
    backend: SolverBackend = "lu",
) -> tuple[np.ndarray, np.ndarray]:
    """Pressure and dp/dt consistent with the momentum balance and the inflow rate at the state's time."""
    free = node.dofmap.free_dofs
    v = state.velocity(node.rho)
    rate_d = _dirichlet_part(node, signal.inflow_rate(state.t))
    load = node.forms.neumann @ np.asarray(signal.u_sigma(state.t), dtype=float)

    rhs_f = (node.generator @ v + load)[free] - node.rho * (node.mass_fd @ rate_d)
    rhs = block_rhs(rhs_f, -(node.div_d @ rate_d))
    factorization = factorize_saddle(_saddle(node, node.rho * node.mass_ff, sigma=node.rho, mu=0.0), backend)
    rate_f, pressure = _solve(factorization, node, rhs, tol, None)

    return pressure, node.rho * _assemble_velocity(node, rate_f, rate_d)


def initial_pressure(
    node: DiscreteOseenNode,
    state: FlowState,
    signal: BoundarySignal,
    tol: float = DEFAULT_TOL,
    backend: SolverBackend = "lu",
) -> FlowState:
    """
    Recovers the pressure of a momentum state from one constraint-consistent solve.
    The velocity rate on the Dirichlet dofs follows the inflow signal (its closed-form derivative
    when the signal carries one, a centred difference otherwise).
    Args:
        node (DiscreteOseenNode): The node.
        state (FlowState): Momentum at time `state.t`; its pressure is ignored.
        signal (BoundarySignal): Boundary inputs.
    Returns:
        FlowState: The same momentum and time with the recovered pressure.
    """

    pressure, _ = _pressure_and_rate(node, state, signal, tol, backend)
    return FlowState(p=state.p, P=pressure, t=state.t)


def check_compatibility(
    node: DiscreteOseenNode,
    state: FlowState,
    signal: BoundarySignal,
    ledger_tol: float = LEDGER_TOL,
    tol: float = DEFAULT_TOL,
) -> list[Violation]:
    """
    Checks that an initial state matches its boundary signal.
    Args:
        node (DiscreteOseenNode): The node.
        state (FlowState): Initial momentum (pressure ignored).
        signal (BoundarySignal): Boundary inputs.
        ledger_tol (float): Tolerance of the outflow stress condition.
    Returns:
        list[Violation]: Empty if the inflow trace equals u_v, the wall trace vanishes, the
            velocity is discretely divergence-free and the consistent outflow flux of the initial
            pressure solve reproduces u_sigma. Input regularity is not checked.
    """

    if state.p.shape != (node.num_velocity,):
        raise DimensionError(f"momentum has shape {state.p.shape}, expected ({node.num_velocity},)")

    dofmap = node.dofmap
    violations = []
    v = state.velocity(node.rho)
    u_v = np.asarray(signal.u_v(state.t), dtype=float)
    u_sigma = np.asarray(signal.u_sigma(state.t), dtype=float)
    scale = max(1.0, float(np.abs(v).max(initial=0.0)))

    traces = ((u_v, dofmap.in_dofs, "inflow boundary"), (u_sigma, dofmap.out_dofs, "outflow boundary"))
    for values, dofs, entity in traces:
        if values.shape != (len(dofs),):
            violations.append(Violation(rule="trace size", entity=entity, detail=f"{values.shape} vs {len(dofs)}"))
    if violations:
        logger.warning(COMPATIBILITY_FAILED.format("; ".join(str(v) for v in violations)))
        return violations

    corner = np.abs(u_v[dofmap.in_wall_trace])
    if corner.size and corner.max() > TRACE_TOL:
        detail = f"|u_v| = {corner.max():.3e}"
        violations.append(Violation(rule="corner data", entity="inflow/wall corner", detail=detail))

    mismatch = np.abs(v[dofmap.in_dofs] - u_v)
    if mismatch.size and mismatch.max() > TRACE_TOL:
        violations.append(Violation(rule="trace mismatch", entity="inflow boundary", detail=f"{mismatch.max():.3e}"))

    wall = np.abs(v[dofmap.wall_dofs])
    if wall.size and wall.max() > TRACE_TOL:
        violations.append(Violation(rule="no-slip", entity="wall boundary", detail=f"{wall.max():.3e}"))

    divergence = float(np.abs(node.forms.div @ v).max(initial=0.0))
    if divergence > DIV_TOL * scale:
        violations.append(Violation(rule="incompressibility", entity="initial velocity", detail=f"{divergence:.3e}"))

    if not violations:
        try:
            pressure, rate = _pressure_and_rate(node, state, signal, tol)
        except OseenError as e:
            violations.append(Violation(rule="initial solve", entity="pressure", detail=get_exception_msg(e)))
        else:
            solved = FlowState(p=state.p, P=pressure, t=state.t)
            flux = consistent_boundary_flux(node.forms, dofmap, solved, BoundaryTag.OUT, rate)
            expected = node.forms.trace_mass_out @ u_sigma
            positions = dofmap.out_free_trace
            gap = np.abs(flux[positions] - expected[positions])
            if gap.size and gap.max() > ledger_tol * max(1.0, float(np.abs(expected).max())):
                violations.append(Violation(rule="outflow stress", entity="outflow", detail=f"{gap.max():.3e}"))

    if violations:
        logger.warning(COMPATIBILITY_FAILED.format("; ".join(str(v) for v in violations)))

    return violations


class MidpointStepper:
    """
    Implicit midpoint rule on the saddle-point system.

    One step solves for the midpoint velocity w = (v + v+)/2 and the pressure P:
        (2 rho / dt) Mass (w - v) = (-mu Stiff + rho Adv - c Mass) w - Div^T P + Neumann load
        Div w = 0,  w = lifting(u_v) on the Dirichlet dofs,
    all inputs sampled at t + dt/2, then sets v+ = 2 w - v. Factorizations are kept per step size.
    """

    def __init__(
        self,
        node: DiscreteOseenNode,
        signal: BoundarySignal,
        tol: float = DEFAULT_TOL,
        backend: SolverBackend = "lu",
        ledger_tol: float = LEDGER_TOL,
    ) -> None:
        self.node = node
        self.signal = signal
        self.tol = tol
        self.backend = backend
        self.ledger_tol = ledger_tol
        self.stats = SolverStats(backend=backend)
        self.factorizations: LRUCache = LRUCache(maxsize=4)
        self._drift_reported = False

    @cachedmethod(lambda self: self.factorizations)
    def factorization(self, dt: float) -> SaddleFactorization:
        node = self.node
        shifted = (2.0 * node.rho / dt) * node.mass_ff - node.generator_ff
        self.stats.factorizations += 1
        schur_shift = 2.0 * node.rho / dt + node.c
        return factorize_saddle(_saddle(node, shifted, sigma=schur_shift, mu=node.mu), self.backend)

    def step(self, state: FlowState, dt: float) -> tuple[FlowState, LedgerRow]:
        """
        Advances `state` by `dt`.
        Returns:
            tuple[FlowState, LedgerRow]: New state (carrying the midpoint pressure) and its ledger row.
        Raises:
            SolverError: If the saddle solve fails.
        """

        if not dt > 0:
            raise DimensionError(f"step length must be positive, got {dt}")

        node, dofmap, signal = self.node, self.node.dofmap, self.signal
        free = dofmap.free_dofs
        rho = node.rho
        t_mid = state.t + 0.5 * dt

        v = state.velocity(rho)
        u_v = np.asarray(signal.u_v(t_mid), dtype=float)
        u_sigma = np.asarray(signal.u_sigma(t_mid), dtype=float)
        w_d = _dirichlet_part(node, u_v)
        load = node.forms.neumann @ u_sigma
        shift = 2.0 * rho / dt

        rhs_f = shift * (node.forms.mass @ v)[free] + load[free]
        rhs_f -= shift * (node.mass_fd @ w_d) - node.generator_fd @ w_d
        rhs = block_rhs(rhs_f, -(node.div_d @ w_d))
        w_f, pressure = _solve(self.factorization(dt), node, rhs, self.tol, self.stats)

        w = _assemble_velocity(node, w_f, w_d)
        v_new = 2.0 * w - v
        new_state = FlowState(p=rho * v_new, P=pressure, t=state.t + dt)

        row = self._ledger_row(state, new_state, w, u_v, u_sigma, dt)
        self.stats.steps += 1

        return new_state, row

    def _ledger_row(
        self, state: FlowState, new_state: FlowState, w: np.ndarray, u_v: np.ndarray, u_sigma: np.ndarray, dt: float
    ) -> LedgerRow:
        node, dofmap = self.node, self.node.dofmap
        forms = node.forms

        momentum_rate = (new_state.p - state.p) / dt
        midpoint = FlowState(p=node.rho * w, P=new_state.P, t=state.t + 0.5 * dt)
        y_sigma = consistent_boundary_flux(forms, dofmap, midpoint, BoundaryTag.IN, momentum_rate)
        y_v = w[dofmap.out_dofs]

        h_old, h_new = hamiltonian(node, state), hamiltonian(node, new_state)
        dissipation = dissipation_rate(node, w)
        supply_in = float(y_sigma @ u_v)
        supply_out = float(y_v @ (forms.trace_mass_out @ u_sigma))
        residual = h_new - h_old - dt * (dissipation + supply_in + supply_out)

        v_new = new_state.velocity(node.rho)
        target = np.asarray(self.signal.u_v(new_state.t), dtype=float)
        drift = float(np.abs(v_new[dofmap.in_dofs] - target).max(initial=0.0))

        if abs(residual) > self.ledger_tol * max(1.0, h_new):
            logger.warning(LEDGER_RESIDUAL_HIGH.format(abs(residual), self.ledger_tol * max(1.0, h_new), new_state.t))
        if drift > DRIFT_FACTOR * self.tol and not self._drift_reported:
            logger.warning(DIRICHLET_DRIFT.format(drift, DRIFT_FACTOR * self.tol, new_state.t))
            self._drift_reported = True

        return LedgerRow(
            t=new_state.t,
            dt=dt,
            H=h_new,
            dissipation=dissipation,
            supply_in=supply_in,
            supply_out=supply_out,
            residual=residual,
            div_inf=float(np.abs(forms.div @ v_new).max(initial=0.0)),
            pressure_work=float(new_state.P @ (forms.div @ w)),
            drift=drift,
        )

    def initial_row(self, state: FlowState) -> LedgerRow:
        v = state.velocity(self.node.rho)
        return LedgerRow(
            t=state.t,
            H=hamiltonian(self.node, state),
            div_inf=float(np.abs(self.node.forms.div @ v).max(initial=0.0)),
        )

    def run(self, state: FlowState, t_end: float, dt: float, stride: int = 1) -> Trajectory:
        """
        Steps from `state.t` to `t_end`; the last step is shortened to land on `t_end`.
        Errors raised by a step end the run; the partial trajectory is returned with `error` set.
        """

        if not dt > 0:
            raise DimensionError(f"step length must be positive, got {dt}")
        if stride < 1:
            raise DimensionError(f"output stride must be at least 1, got {stride}")

        t0 = state.t
        span = max(t_end - t0, 0.0)
        num_steps = math.ceil(span / dt - 1e-9) if span > 0 else 0

        trajectory = Trajectory(states=[state], stats=self.stats)
        trajectory.ledger.append(self.initial_row(state))

        current = state
        reported = 0.0
        for k, fraction in progressify_sequence(range(1, num_steps + 1)):
            last = k == num_steps
            h = t_end - current.t if last else dt
            if abs(h - dt) <= 1e-12 * dt:
                h = dt
            try:
                current, row = self.step(current, h)
            except OseenError as e:
                trajectory.error = get_exception_msg(e)
                logger.error(SIMULATION_ABORTED.format(current.t, trajectory.error))
                break

            if last:
                current = current.model_copy(update={"t": t_end})
                row = row.model_copy(update={"t": t_end})
            trajectory.ledger.append(row)
            if k % stride == 0 or k == num_steps:
                trajectory.states.append(current)
            if should_report(fraction, reported):
                logger.info(STEP_DONE.format(k, num_steps, row.t, row.H, row.residual))
                reported = fraction

        if trajectory.states[-1] is not current:
            trajectory.states.append(current)

        return trajectory


def step_implicit_midpoint(
    node: DiscreteOseenNode,
    state: FlowState,
    signal: BoundarySignal,
    dt: float,
    tol: float = DEFAULT_TOL,
    backend: SolverBackend = "lu",
) -> tuple[FlowState, LedgerRow]:
    return MidpointStepper(node, signal, tol, backend).step(state, dt)


def simulate(
    node: DiscreteOseenNode,
    signal: BoundarySignal,
    p0: FlowState,
    t_end: float,
    dt: float,
    stride: int = 1,
    tol: float = DEFAULT_TOL,
    backend: SolverBackend = "lu",
    ledger_tol: float = LEDGER_TOL,
    force: bool = False,
) -> Trajectory:
    """
    Runs the implicit midpoint rule from `p0` to `t_end`.
    Args:
        node (DiscreteOseenNode): The node.
        signal (BoundarySignal): Boundary inputs.
        p0 (FlowState): Initial momentum at time p0.t; the pressure is recovered.
        t_end (float): Final time.
        dt (float): Step length.
        stride (int): Every `stride`-th state is kept in the trajectory.
        force (bool): Skip the compatibility gate.
    Returns:
        Trajectory: States, the energy ledger (one row per step plus the initial row) and statistics.
    Raises:
        CompatibilityError: If the initial state does not match the signal and `force` is not set.
    """

    if not force:
        violations = check_compatibility(node, p0, signal, ledger_tol, tol)
        if violations:
            raise CompatibilityError("; ".join(str(v) for v in violations))

    try:
        start = initial_pressure(node, p0, signal, tol, backend)
    except OseenError as e:
        if not force:
            raise
        logger.warning(get_exception_msg(e))
        start = p0

    stepper = MidpointStepper(node, signal, tol, backend, ledger_tol)
    return stepper.run(start, t_end, dt, stride)


def steady_solve(
    node: DiscreteOseenNode,
    u_v: np.ndarray,
    u_sigma: np.ndarray,
    tol: float = DEFAULT_TOL,
    backend: SolverBackend = "lu",
) -> FlowState:
    """
    Solves the time-independent balance (zero momentum rate).
    Args:
        node (DiscreteOseenNode): The node; its Out boundary must be non-empty.
        u_v (np.ndarray): Inflow trace values.
        u_sigma (np.ndarray): Outflow stress values.
    Returns:
        FlowState: Momentum and pressure with the Dirichlet data imposed exactly, at t = 0.
    """

    if not len(node.dofmap.out_nodes):
        raise MeshError("steady solve needs a non-empty outflow boundary")

    free = node.dofmap.free_dofs
    w_d = _dirichlet_part(node, u_v)
    u_sigma = np.asarray(u_sigma, dtype=float)
    if u_sigma.shape != (len(node.dofmap.out_dofs),):
        raise DimensionError(f"u_sigma has shape {u_sigma.shape}, expected ({len(node.dofmap.out_dofs)},)")

    rhs_f = (node.forms.neumann @ u_sigma)[free] + node.generator_fd @ w_d
    rhs = block_rhs(rhs_f, -(node.div_d @ w_d))
    factorization = factorize_saddle(_saddle(node, -node.generator_ff, sigma=node.c, mu=node.mu), backend)
    v_f, pressure = _solve(factorization, node, rhs, tol, None)

    return FlowState(p=node.rho * _assemble_velocity(node, v_f, w_d), P=pressure, t=0.0)


def resolvent_solve(
    node: DiscreteOseenNode,
    z: np.ndarray,
    lam: float = 1.0,
    tol: float = DEFAULT_TOL,
    backend: SolverBackend = "lu",
) -> FlowState:
    """
    Solves lam rho Mass v - (-mu Stiff + rho Adv - c Mass) v + Div^T P = Mass z, Div v = 0 with
    homogeneous Dirichlet data and zero outflow stress.
    Returns:
        FlowState: p = rho v and P.
    """

    z = np.asarray(z, dtype=float)
    if z.shape != (node.num_velocity,):
        raise DimensionError(f"load has shape {z.shape}, expected ({node.num_velocity},)")
    if not lam > 0:
        raise DimensionError(f"resolvent parameter must be positive, got {lam}")

    free = node.dofmap.free_dofs
    a = lam * node.rho * node.mass_ff - node.generator_ff
    rhs = block_rhs((node.forms.mass @ z)[free], np.zeros(node.num_pressure))
    system = _saddle(node, a, sigma=lam * node.rho + node.c, mu=node.mu)
    v_f, pressure = _solve(factorize_saddle(system, backend), node, rhs, tol, None)

    v = np.zeros(node.num_velocity)
    v[free] = v_f

    return FlowState(p=node.rho * v, P=pressure, t=0.0)
