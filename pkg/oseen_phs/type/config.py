from __future__ import annotations

from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator


__all__ = ["ScenarioConfig", "PRESETS"]


class ScenarioConfig(BaseModel):
    """
    Flat scenario description. Keys of a config file map to fields, or to their alias where
    one is declared; unknown keys are rejected.
    """

    model_config = ConfigDict(extra="forbid", populate_by_name=True, protected_namespaces=())

    name: str = "scenario"

    # mesh: a file, or the builtin channel [0, length] x [0, height]
    mesh_file: Optional[str] = Field(default=None, alias="mesh")
    length: float = Field(default=2.0, gt=0)
    height: float = Field(default=1.0, gt=0)
    nx: int = Field(default=8, ge=1)
    ny: int = Field(default=4, ge=1)

    mu: float = Field(default=1.0, ge=0)
    rho: float = Field(default=1.0, gt=0)
    c: float = Field(default=0.0, ge=0)
    allow_inviscid: bool = Field(default=False, alias="allow inviscid")

    convection: str = "none"
    convection_amplitude: float = Field(default=1.0, alias="convection amplitude")

    inflow: Literal["zero", "parabolic"] = "zero"
    inflow_peak: float = Field(default=1.0, alias="inflow peak")
    inflow_ramp: float = Field(default=0.0, ge=0, alias="inflow ramp")

    outflow: Literal["zero", "constant", "sinusoidal"] = "zero"
    outflow_x: float = Field(default=0.0, alias="outflow x")
    outflow_y: float = Field(default=0.0, alias="outflow y")
    outflow_frequency: float = Field(default=1.0, gt=0, alias="outflow frequency")

    initial: Literal["zero", "steady", "random"] = "zero"
    initial_amplitude: float = Field(default=1.0, alias="initial amplitude")
    seed: int = 0

    dt: float = Field(default=1e-2, gt=0)
    t_end: float = Field(default=1.0, ge=0, alias="t end")
    stride: int = Field(default=1, ge=1)

    solver: Literal["lu", "gmres"] = "lu"
    tol: float = Field(default=1e-12, gt=0)
    ledger_tol: float = Field(default=1e-8, gt=0, alias="ledger tol")
    oracle_tol: float = Field(default=1e-5, gt=0, alias="oracle tol")

    out_dir: str = Field(default="out", alias="out dir")
    vtk: bool = False
    dump_matrices: bool = Field(default=False, alias="dump matrices")
    force: bool = False

    @model_validator(mode="after")
    def _check_viscosity(self) -> "ScenarioConfig":
        if self.mu == 0.0 and not self.allow_inviscid:
            raise ValueError("mu must be positive unless 'allow inviscid' is set")
        return self

    @property
    def has_convection(self) -> bool:
        return self.convection.strip().lower() not in ("", "none", "0")


PRESETS: dict[str, dict[str, object]] = {
    "decay": {"name": "decay", "initial": "random", "t_end": 1.0, "dt": 1e-2},
    "poiseuille-steady": {
        "name": "poiseuille-steady",
        "inflow": "parabolic",
        "initial": "steady",
        "t_end": 0.1,
        "dt": 1e-2,
    },
    "ramp": {
        "name": "ramp",
        "nx": 16,
        "ny": 8,
        "inflow": "parabolic",
        "inflow_ramp": 0.5,
        "t_end": 1.0,
        "dt": 1e-2,
    },
    "vortex-decay": {"name": "vortex-decay", "initial": "random", "convection": "vortex", "t_end": 1.0, "dt": 1e-2},
    "conservative": {
        "name": "conservative",
        "mu": 0.0,
        "allow_inviscid": True,
        "convection": "vortex",
        "initial": "random",
        "t_end": 1.0,
        "dt": 1e-2,
    },
    "oracle": {
        "name": "oracle",
        "nx": 2,
        "ny": 2,
        "outflow": "sinusoidal",
        "outflow_x": 1.0,
        "outflow_y": 0.5,
        "initial": "random",
        "t_end": 1.0,
        "dt": 1e-3,
    },
}
