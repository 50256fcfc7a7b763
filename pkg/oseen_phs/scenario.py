"""
Scenario orchestration: config parsing, problem construction, runs and their artifacts.
"""

import math
import os
from typing import Any, Optional

import numpy as np
from pydantic import ValidationError

from oseen_phs.assembly import boundary_flux_rates
from oseen_phs.const import COMMENT, DENSE_LIMIT, DUMPED_MATRICES, LEDGER_CSV, MATRIX_DUMP_PATTERN, SCENARIO_START
from oseen_phs.const import SUMMARY_JSON, VTK_PATTERN
from oseen_phs.convection import TangentialField, generate_tangential_field
from oseen_phs.integrate import simulate, steady_solve
from oseen_phs.mesh import build_channel_mesh, read_mesh_file
from oseen_phs.node import build_node, dissipation_rate, port_output, random_divergence_free_state, supply_terms
from oseen_phs.oracle import from_reduced, mild_solution, reduce_node, semigroup_contractivity_check
from oseen_phs.oracle import spectral_abscissa, to_reduced
from oseen_phs.utils.errors import AcceptanceError, ConfigError, OseenError, SolverError, get_exception_msg
from oseen_phs.utils.files import ensure_directory, write_json_file, write_ledger_csv, write_matrix_dump, write_vtk
from oseen_phs.utils.logger import logger
from oseen_phs.utils.progress import progressify_sequence
from oseen_phs.type import BoundarySignal, DiscreteOseenNode, FlowState, Mesh, PRESETS, ScenarioConfig
from oseen_phs.type import Trajectory


CONTRACTIVITY_SLACK = 1e-10
ABSCISSA_TOL = 1e-10
ORDER_RATIO_RANGE = (3.5, 4.5)

MODES = ("run", "steady", "oracle-compare", "convergence")


def _normalize_key(key: str) -> str:
    name = key.strip().lower().replace("-", "_").replace(" ", "_")
    aliases = {
        field.alias.replace(" ", "_"): attribute
        for attribute, field in ScenarioConfig.model_fields.items()
        if field.alias is not None
    }
    return aliases.get(name, name)


def _validate(values: dict[str, Any]) -> ScenarioConfig:
    try:
        return ScenarioConfig.model_validate(values)
    except ValidationError as e:
        problems = "; ".join(f"{'.'.join(str(p) for p in err['loc']) or 'config'}: {err['msg']}" for err in e.errors())
        raise ConfigError(f"invalid config: {problems}") from None


def parse_config_text(text: str, overrides: Optional[dict[str, Any]] = None) -> ScenarioConfig:
    """
    Parses flat `key = value` lines; `#` starts a comment.
    A `preset = <name>` line loads the preset's values, later lines override them. Keys may use
    spaces, dashes or underscores.
    Args:
        text (str): Config file content.
        overrides (dict, optional): Field values applied last; None values are ignored.
    Returns:
        ScenarioConfig: The validated configuration.
    Raises:
        ConfigError: On syntax errors (with line number), unknown presets or invalid values (with key).
    """

    values: dict[str, Any] = {}
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split(COMMENT, 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {number}: expected 'key = value', got '{line}'")

        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigError(f"line {number}: missing key")

        name = _normalize_key(key)
        if name == "preset":
            if value not in PRESETS:
                raise ConfigError(f"line {number}: unknown preset '{value}' (known: {', '.join(PRESETS)})")
            values.update(PRESETS[value])
        else:
            values[name] = value

    for key, value in (overrides or {}).items():
        if value is not None:
            values[_normalize_key(key)] = value

    return _validate(values)


def load_config(path: str, overrides: Optional[dict[str, Any]] = None) -> ScenarioConfig:
    if not os.path.isfile(path):
        raise ConfigError(f"config file not found: {path}")

    with open(path, "r") as f:
        return parse_config_text(f.read(), overrides)


def build_mesh(config: ScenarioConfig) -> Mesh:
    if config.mesh_file:
        return read_mesh_file(config.mesh_file)
    return build_channel_mesh(config.length, config.height, config.nx, config.ny)


def build_convection(config: ScenarioConfig, mesh: Mesh) -> Optional[TangentialField]:
    if not config.has_convection:
        return None
    try:
        return generate_tangential_field(mesh, config.convection, config.convection_amplitude)
    except Exception as e:
        raise ConfigError(f"convection: cannot parse '{config.convection}': {get_exception_msg(e)}") from None


def build_problem(config: ScenarioConfig) -> DiscreteOseenNode:
    mesh = build_mesh(config)
    return build_node(mesh, config.mu, config.rho, config.c, build_convection(config, mesh))


def _ramp(duration: float) -> tuple[Any, Any]:
    if duration <= 0.0:
        return (lambda t: 1.0), (lambda t: 0.0)

    def value(t: float) -> float:
        if t <= 0.0:
            return 0.0
        return 1.0 if t >= duration else 0.5 * (1.0 - math.cos(math.pi * t / duration))

    def rate(t: float) -> float:
        return 0.5 * math.pi / duration * math.sin(math.pi * t / duration) if 0.0 < t < duration else 0.0

    return value, rate


def parabolic_profile(node: DiscreteOseenNode, peak: float) -> np.ndarray:
    """x-directed parabola over the In boundary, vanishing at its lowest and highest node."""
    y = node.mesh.quadratic_points[node.dofmap.in_nodes, 1]
    y0, y1 = float(y.min()), float(y.max())
    profile = peak * 4.0 * (y - y0) * (y1 - y) / (y1 - y0) ** 2
    return np.concatenate([profile, np.zeros_like(profile)])


def build_signal(config: ScenarioConfig, node: DiscreteOseenNode) -> BoundarySignal:
    """
    Boundary inputs of a scenario: parabolic (optionally ramped) or zero inflow, and zero,
    constant or sinusoidal outflow stress.
    """

    dofmap = node.dofmap
    out_size = len(dofmap.out_nodes)
    direction = np.concatenate([np.full(out_size, config.outflow_x), np.full(out_size, config.outflow_y)])

    if config.inflow == "parabolic":
        profile = parabolic_profile(node, config.inflow_peak)
    else:
        profile = np.zeros(len(dofmap.in_dofs))

    if config.outflow == "zero":
        stress = np.zeros(2 * out_size)
        u_sigma = lambda t: stress
    elif config.outflow == "constant":
        u_sigma = lambda t: direction
    else:
        omega = 2.0 * math.pi * config.outflow_frequency
        u_sigma = lambda t: math.sin(omega * t) * direction

    value, rate = _ramp(config.inflow_ramp)

    return BoundarySignal(
        u_v=lambda t: value(t) * profile,
        u_sigma=u_sigma,
        du_v=lambda t: rate(t) * profile,
        time_constant_inflow=config.inflow_ramp == 0.0 or config.inflow == "zero",
    )


def initial_state(config: ScenarioConfig, node: DiscreteOseenNode, signal: BoundarySignal) -> FlowState:
    u_v, u_sigma = signal.u_v(0.0), signal.u_sigma(0.0)
    if config.initial == "zero":
        return FlowState.zero(node.num_velocity, node.num_pressure)

    if np.any(u_v != 0.0) or np.any(u_sigma != 0.0):
        base = steady_solve(node, u_v, u_sigma, config.tol, config.solver)
    else:
        base = FlowState.zero(node.num_velocity, node.num_pressure)
    if config.initial == "steady":
        return base

    rng = np.random.default_rng(config.seed)
    perturbation = random_divergence_free_state(node, rng, config.initial_amplitude)
    return FlowState(p=base.p + perturbation.p, P=base.P, t=0.0)


def energy_error(node: DiscreteOseenNode, v: np.ndarray, reference: np.ndarray) -> float:
    """Relative error in the energy norm; absolute when the reference vanishes."""
    mass = node.forms.mass
    difference = v - reference
    error = math.sqrt(max(float(difference @ (mass @ difference)), 0.0))
    scale = math.sqrt(max(float(reference @ (mass @ reference)), 0.0))
    return error / scale if scale > 0.0 else error


def _trajectory_summary(config: ScenarioConfig, node: DiscreteOseenNode, trajectory: Trajectory) -> dict[str, Any]:
    ledger = trajectory.ledger
    totals = ledger.totals()
    final = trajectory.final.velocity(node.rho)
    inflow_rate, outflow_rate = boundary_flux_rates(node.mesh, final)

    summary: dict[str, Any] = {
        "name": config.name,
        "status": "ok" if trajectory.completed else "aborted",
        "error": trajectory.error,
        "steps": len(ledger) - 1,
        "initial_H": totals["H_initial"],
        "final_H": totals["H_final"],
        "total_dissipation": totals["dissipation"],
        "total_supply_in": totals["supply_in"],
        "total_supply_out": totals["supply_out"],
        "total_supply": totals["supply_in"] + totals["supply_out"],
        "residual_sum": totals["residual_sum"],
        "max_residual": totals["max_residual"],
        "cumulative_defect": ledger.cumulative_defect(),
        "max_div_inf": totals["max_div_inf"],
        "max_pressure_work": totals["max_pressure_work"],
        "max_drift": totals["max_drift"],
        "dissipation_inequality": ledger.dissipation_inequality_holds(config.ledger_tol),
        "inflow_rate": inflow_rate,
        "outflow_rate": outflow_rate,
        "net_flux": inflow_rate + outflow_rate,
        "solver": trajectory.stats.model_dump(),
    }

    if config.initial == "steady":
        start = trajectory.states[0].velocity(node.rho)
        scale = max(float(np.abs(start).max()), 1e-300)
        deviation = max(float(np.abs(s.velocity(node.rho) - start).max()) for s in trajectory.states)
        summary["steady_deviation"] = deviation / scale

    return summary


def _write_states(config: ScenarioConfig, node: DiscreteOseenNode, states: list[FlowState]) -> None:
    if not config.vtk:
        return
    for k, state in enumerate(states):
        write_vtk(node.mesh, state, os.path.join(config.out_dir, VTK_PATTERN.format(k)), node.rho)


def _write_matrices(config: ScenarioConfig, node: DiscreteOseenNode) -> None:
    if not config.dump_matrices:
        return
    for name in DUMPED_MATRICES:
        write_matrix_dump(getattr(node.forms, name), os.path.join(config.out_dir, MATRIX_DUMP_PATTERN.format(name)))


def run_trajectory(config: ScenarioConfig) -> tuple[DiscreteOseenNode, Trajectory, dict[str, Any]]:
    """
    Builds the scenario, simulates it and writes ledger, summary, optional VTK snapshots and matrix dumps.
    Returns:
        tuple[DiscreteOseenNode, Trajectory, dict]: The node, the trajectory and the summary.
    """

    logger.info(SCENARIO_START.format(config.name, "run"))
    node = build_problem(config)
    signal = build_signal(config, node)
    start = initial_state(config, node, signal)

    trajectory = simulate(
        node,
        signal,
        start,
        config.t_end,
        config.dt,
        stride=config.stride,
        tol=config.tol,
        backend=config.solver,
        ledger_tol=config.ledger_tol,
        force=config.force,
    )

    ensure_directory(config.out_dir)
    summary = _trajectory_summary(config, node, trajectory)
    write_ledger_csv(trajectory.ledger, os.path.join(config.out_dir, LEDGER_CSV))
    write_json_file(summary, os.path.join(config.out_dir, SUMMARY_JSON))
    _write_states(config, node, trajectory.states)
    _write_matrices(config, node)

    if not trajectory.completed:
        raise SolverError(f"simulation aborted: {trajectory.error}")

    return node, trajectory, summary


def poiseuille_errors(config: ScenarioConfig, node: DiscreteOseenNode, state: FlowState) -> dict[str, float]:
    """Relative L2 errors against the closed-form channel solution of a parabolic inflow."""
    points = node.mesh.quadratic_points
    lo, hi = points.min(axis=0), points.max(axis=0)
    height, length = hi[1] - lo[1], hi[0] - lo[0]
    y = points[:, 1] - lo[1]

    exact_v = np.concatenate([config.inflow_peak * 4.0 * y * (height - y) / height**2, np.zeros(len(points))])
    vertices = node.mesh.points
    exact_p = 8.0 * config.mu * config.inflow_peak / height**2 * (length - (vertices[:, 0] - lo[0]))

    pressure_error = state.P - exact_p
    pressure_mass = node.forms.pressure_mass
    pressure_scale = float(exact_p @ (pressure_mass @ exact_p))

    return {
        "velocity_error": energy_error(node, state.velocity(node.rho), exact_v),
        "pressure_error": math.sqrt(float(pressure_error @ (pressure_mass @ pressure_error)) / pressure_scale)
        if pressure_scale > 0
        else float(np.abs(pressure_error).max()),
    }


def steady_scenario(config: ScenarioConfig) -> dict[str, Any]:
    """Steady solve for the inputs at t = 0, with its power balance."""

    logger.info(SCENARIO_START.format(config.name, "steady"))
    node = build_problem(config)
    signal = build_signal(config, node)
    u_v, u_sigma = signal.u_v(0.0), signal.u_sigma(0.0)

    state = steady_solve(node, u_v, u_sigma, config.tol, config.solver)
    supply_in, supply_out = supply_terms(node, port_output(node, state), u_v, u_sigma)
    v = state.velocity(node.rho)
    dissipation = dissipation_rate(node, v)
    inflow_rate, outflow_rate = boundary_flux_rates(node.mesh, v)

    summary: dict[str, Any] = {
        "name": config.name,
        "status": "ok",
        "dissipation": dissipation,
        "supply_in": supply_in,
        "supply_out": supply_out,
        "balance": supply_in + supply_out + dissipation,
        "div_inf": float(np.abs(node.forms.div @ v).max(initial=0.0)),
        "inflow_rate": inflow_rate,
        "outflow_rate": outflow_rate,
    }
    closed_form = config.inflow == "parabolic" and config.outflow == "zero" and not config.has_convection
    if closed_form and config.c == 0.0 and not config.mesh_file:
        summary.update(poiseuille_errors(config, node, state))

    ensure_directory(config.out_dir)
    write_json_file(summary, os.path.join(config.out_dir, SUMMARY_JSON))
    _write_states(config, node, [state])
    _write_matrices(config, node)

    return summary


def _oracle_reference(
    config: ScenarioConfig, node: DiscreteOseenNode, signal: BoundarySignal, start: FlowState
) -> tuple[np.ndarray, dict[str, float]]:
    if not signal.time_constant_inflow:
        raise ConfigError("inflow ramp: the oracle needs time-constant inflow data")
    if len(node.dofmap.free_dofs) > DENSE_LIMIT:
        raise ConfigError(f"mesh: {len(node.dofmap.free_dofs)} free dofs exceed the oracle limit of {DENSE_LIMIT}")

    red = reduce_node(node, signal.u_v(0.0))
    x0 = to_reduced(red, start.velocity(node.rho))
    reference = from_reduced(red, mild_solution(red, x0, signal.u_sigma, config.t_end, config.dt))
    checks = {
        "contractivity": semigroup_contractivity_check(red, samples=10, seed=config.seed),
        "spectral_abscissa": spectral_abscissa(red),
        "reduced_size": float(red.size),
    }

    return reference, checks


def oracle_compare(config: ScenarioConfig) -> dict[str, Any]:
    """
    Compares a simulation at the configured dt with the dense mild solution at t_end.
    Raises:
        AcceptanceError: If the relative energy-norm error exceeds `oracle_tol` or the reduced
            node fails the contractivity or spectral checks.
    """

    logger.info(SCENARIO_START.format(config.name, "oracle-compare"))
    node = build_problem(config)
    signal = build_signal(config, node)
    start = initial_state(config, node, signal)

    reference, checks = _oracle_reference(config, node, signal, start)
    trajectory = simulate(node, signal, start, config.t_end, config.dt, tol=config.tol, backend=config.solver)
    if not trajectory.completed:
        raise SolverError(f"simulation aborted: {trajectory.error}")

    error = energy_error(node, trajectory.final.velocity(node.rho), reference)
    summary: dict[str, Any] = {"name": config.name, "dt": config.dt, "error": error, **checks}
    failures = []
    if error > config.oracle_tol:
        failures.append(f"error {error:.3e} > {config.oracle_tol:.1e}")
    if checks["contractivity"] > 1.0 + CONTRACTIVITY_SLACK:
        failures.append(f"growth factor {checks['contractivity']:.12f} > 1")
    if checks["spectral_abscissa"] > ABSCISSA_TOL:
        failures.append(f"spectral abscissa {checks['spectral_abscissa']:.3e} > 0")
    summary["status"] = "ok" if not failures else "failed"

    ensure_directory(config.out_dir)
    write_json_file(summary, os.path.join(config.out_dir, SUMMARY_JSON))
    if failures:
        raise AcceptanceError("oracle comparison failed: " + "; ".join(failures))

    return summary


def convergence_study(config: ScenarioConfig, levels: int = 3) -> dict[str, Any]:
    """
    dt-halving study ending at the configured dt. The reference is the dense mild solution when
    the scenario admits it, otherwise a run with a quarter of the finest step.
    Raises:
        AcceptanceError: If successive error ratios leave [3.5, 4.5].
    """

    logger.info(SCENARIO_START.format(config.name, "convergence"))
    node = build_problem(config)
    signal = build_signal(config, node)
    start = initial_state(config, node, signal)
    steps = [config.dt * 2 ** (levels - 1 - i) for i in range(levels)]

    if signal.time_constant_inflow and len(node.dofmap.free_dofs) <= DENSE_LIMIT:
        reference, _ = _oracle_reference(config, node, signal, start)
        source = "oracle"
    else:
        fine = simulate(node, signal, start, config.t_end, steps[-1] / 4.0, tol=config.tol, backend=config.solver)
        reference, source = fine.final.velocity(node.rho), "fine run"

    errors = []
    for dt, fraction in progressify_sequence(steps):
        trajectory = simulate(node, signal, start, config.t_end, dt, tol=config.tol, backend=config.solver)
        if not trajectory.completed:
            raise SolverError(f"simulation aborted: {trajectory.error}")
        errors.append(energy_error(node, trajectory.final.velocity(node.rho), reference))
        logger.info(f"dt={dt:.3e} error={errors[-1]:.3e} ({fraction:.0%})")

    ratios = [errors[i] / errors[i + 1] if errors[i + 1] > 0 else math.inf for i in range(len(errors) - 1)]
    low, high = ORDER_RATIO_RANGE
    failures = [f"ratio {r:.3f} outside [{low}, {high}]" for r in ratios if not low <= r <= high]
    if source == "oracle" and errors[-1] > config.oracle_tol:
        failures.append(f"finest error {errors[-1]:.3e} > {config.oracle_tol:.1e}")

    summary = {
        "name": config.name,
        "reference": source,
        "dt": steps,
        "errors": errors,
        "ratios": ratios,
        "status": "ok" if not failures else "failed",
    }
    ensure_directory(config.out_dir)
    write_json_file(summary, os.path.join(config.out_dir, SUMMARY_JSON))
    if failures:
        raise AcceptanceError("convergence study failed: " + "; ".join(failures))

    return summary


def run_scenario(config: ScenarioConfig, mode: str = "run") -> int:
    """
    Runs one scenario mode and converts package errors to exit codes.
    Returns:
        int: 0 on success, otherwise the exit code of the raised error.
    """

    try:
        if mode == "run":
            run_trajectory(config)
        elif mode == "steady":
            steady_scenario(config)
        elif mode == "oracle-compare":
            oracle_compare(config)
        elif mode == "convergence":
            convergence_study(config)
        else:
            raise ConfigError(f"unknown mode '{mode}' (known: {', '.join(MODES)})")
    except OseenError as e:
        logger.error(f"{config.name}: {get_exception_msg(e)}")
        return e.exit_code

    return 0
