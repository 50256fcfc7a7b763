from __future__ import annotations

from typing import Callable, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field


__all__ = ["FlowState", "BoundarySignal", "PortOutput", "LedgerRow", "EnergyLedger", "SolverStats", "Trajectory"]


TraceFunction = Callable[[float], np.ndarray]


class FlowState(BaseModel):
    """Momentum coefficients `p` (velocity v = p / rho), pressure coefficients `P` and time `t`."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    p: np.ndarray
    P: np.ndarray
    t: float = 0.0

    def velocity(self, rho: float) -> np.ndarray:
        return self.p / rho

    @classmethod
    def zero(cls, num_velocity: int, num_pressure: int, t: float = 0.0) -> "FlowState":
        return cls(p=np.zeros(num_velocity), P=np.zeros(num_pressure), t=t)


def _constant(values: np.ndarray) -> TraceFunction:
    frozen = np.array(values, dtype=float)
    frozen.setflags(write=False)
    return lambda t: frozen


class BoundarySignal(BaseModel):
    """
    Boundary inputs as functions of time: `u_v` on the In trace, `u_sigma` on the Out trace.
    `du_v` is the time derivative of `u_v` when known in closed form.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    u_v: TraceFunction
    u_sigma: TraceFunction
    du_v: Optional[TraceFunction] = None
    time_constant_inflow: bool = False

    @classmethod
    def constant(cls, u_v: np.ndarray, u_sigma: np.ndarray) -> "BoundarySignal":
        zero = np.zeros_like(np.asarray(u_v, dtype=float))
        return cls(u_v=_constant(u_v), u_sigma=_constant(u_sigma), du_v=_constant(zero), time_constant_inflow=True)

    @classmethod
    def zero(cls, in_size: int, out_size: int) -> "BoundarySignal":
        return cls.constant(np.zeros(in_size), np.zeros(out_size))

    def inflow_rate(self, t: float, h: float = 1e-6) -> np.ndarray:
        """du_v/dt, from `du_v` if given, otherwise by a centred difference."""
        if self.du_v is not None:
            return np.asarray(self.du_v(t), dtype=float)
        return (np.asarray(self.u_v(t + h), dtype=float) - np.asarray(self.u_v(t - h), dtype=float)) / (2.0 * h)


class PortOutput(BaseModel):
    """Collocated outputs: stress functional `y_sigma` on the In trace, velocity trace `y_v` on the Out trace."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    y_sigma: np.ndarray
    y_v: np.ndarray


class LedgerRow(BaseModel):
    model_config = ConfigDict(frozen=True)

    t: float
    dt: float = 0.0
    H: float
    dissipation: float = 0.0
    supply_in: float = 0.0
    supply_out: float = 0.0
    residual: float = 0.0
    div_inf: float = 0.0
    pressure_work: float = 0.0
    drift: float = 0.0

    @property
    def supply(self) -> float:
        return self.supply_in + self.supply_out


class EnergyLedger(BaseModel):
    """
    Per-step energy bookkeeping. Rates are midpoint values; integrated quantities multiply
    them by the step length of their row. The first row is the initial state.
    """

    rows: list[LedgerRow] = Field(default_factory=list)

    def append(self, row: LedgerRow) -> None:
        self.rows.append(row)

    def __len__(self) -> int:
        return len(self.rows)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(row, name) for row in self.rows], dtype=float)

    def totals(self) -> dict[str, float]:
        """Integrated dissipation and supplies, initial and final H, residual sums and extrema."""
        if not self.rows:
            return {}

        dt = self.column("dt")
        residual = self.column("residual")

        return {
            "H_initial": self.rows[0].H,
            "H_final": self.rows[-1].H,
            "dissipation": float(dt @ self.column("dissipation")),
            "supply_in": float(dt @ self.column("supply_in")),
            "supply_out": float(dt @ self.column("supply_out")),
            "residual_sum": float(residual.sum()),
            "max_residual": float(np.abs(residual).max()),
            "max_div_inf": float(self.column("div_inf").max()),
            "max_pressure_work": float(np.abs(self.column("pressure_work")).max()),
            "max_drift": float(self.column("drift").max()),
        }

    def cumulative_defect(self) -> float:
        """H(end) - H(0) - sum of dt * (dissipation + supply) - sum of residuals; zero up to rounding."""
        if not self.rows:
            return 0.0
        totals = self.totals()
        integrated = totals["dissipation"] + totals["supply_in"] + totals["supply_out"]
        return totals["H_final"] - totals["H_initial"] - integrated - totals["residual_sum"]

    def dissipation_inequality_holds(self, tol: float = 0.0) -> bool:
        """Checks H(t) - H(0) <= integral of the supply up to t at every recorded time."""
        if not self.rows:
            return True
        h = self.column("H")
        supplied = np.cumsum(self.column("dt") * (self.column("supply_in") + self.column("supply_out")))
        return bool(np.all(h - h[0] <= supplied + tol * np.maximum(1.0, h)))


class SolverStats(BaseModel):
    backend: str = "lu"
    steps: int = 0
    solves: int = 0
    factorizations: int = 0
    iterations: int = 0
    max_residual: float = 0.0

    def record(self, residual: float, iterations: int) -> None:
        self.solves += 1
        self.iterations += iterations
        self.max_residual = max(self.max_residual, residual)


class Trajectory(BaseModel):
    """Snapshots decimated by the output stride (first and last state always kept)."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    states: list[FlowState] = Field(default_factory=list)
    ledger: EnergyLedger = Field(default_factory=EnergyLedger)
    stats: SolverStats = Field(default_factory=SolverStats)
    error: Optional[str] = None

    @property
    def final(self) -> FlowState:
        return self.states[-1]

    @property
    def completed(self) -> bool:
        return self.error is None
