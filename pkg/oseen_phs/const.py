MESH_BUILT: str = "Built channel mesh: {0} nodes, {1} triangles, {2} boundary edges"
MESH_LOADED: str = "Loaded mesh: {0} nodes, {1} triangles"
MESH_INVALID: str = "Mesh failed validation with {0} violation(s)"
FORMS_ASSEMBLED: str = "Assembled forms: {0} velocity dofs, {1} pressure dofs, {2} free"

SOLVE_DONE: str = "Saddle solve ({0}): residual {1:.3e}, {2} iteration(s)"

STEP_DONE: str = "Step {0}/{1} t={2:.6g} H={3:.6e} residual={4:.3e}"
LEDGER_RESIDUAL_HIGH: str = "Energy balance residual {0:.3e} exceeds tolerance {1:.3e} at t={2:.6g}"
DIRICHLET_DRIFT: str = "Dirichlet trace drift {0:.3e} exceeds {1:.3e} at t={2:.6g}"
COMPATIBILITY_FAILED: str = "Initial state is not compatible with the boundary signal: {0}"
SIMULATION_ABORTED: str = "Simulation aborted at t={0:.6g}: {1}"
TANGENTIAL_VIOLATIONS: str = "Convection field has {0} boundary point(s) with |b.n| > {1:.1e}"

SCENARIO_START: str = "Running scenario '{0}' ({1})"
ARTIFACT_WRITTEN: str = "Wrote {0}"

# mesh file
MESH_SECTION_NODES: str = "nodes"
MESH_SECTION_TRIANGLES: str = "triangles"
MESH_SECTION_EDGES: str = "boundary_edges"
COMMENT: str = "#"

# artefacts
LEDGER_CSV: str = "ledger.csv"
SUMMARY_JSON: str = "summary.json"
VTK_PATTERN: str = "state_{0:05d}.vtk"
MATRIX_DUMP_PATTERN: str = "matrix_{0}.txt"
DUMPED_MATRICES: tuple[str, ...] = ("mass", "stiff", "adv", "div", "pressure_mass", "neumann")
LEDGER_COLUMNS: tuple[str, ...] = ("t", "H", "dissipation", "supply_in", "supply_out", "residual", "div_inf")

# numerics
DEFAULT_TOL: float = 1e-12
LEDGER_TOL: float = 1e-8
TRACE_TOL: float = 1e-10
DIV_TOL: float = 1e-10
DRIFT_FACTOR: float = 1e3
RANK_TOL: float = 1e-10
DENSE_LIMIT: int = 1000
