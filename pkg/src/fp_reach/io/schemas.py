"""
File schemas for emitted JSON documents

Every document carries schema_version. Floats are written with the shortest
round-trip representation, and non-finite values as the JSON constants
NaN/Infinity.
"""

from typing import List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator

from ..ocp.solve import SolverReport

FILE_SCHEMA_VERSION = 1


class _Document(BaseModel):
    model_config = ConfigDict(extra="forbid", ser_json_inf_nan="constants")

    schema_version: int = FILE_SCHEMA_VERSION


class OrbitFile(_Document):
    """Corrected reference orbit"""
    state: List[float]
    period: float = Field(gt=0.0)
    closure_residual: float = Field(ge=0.0)
    epoch: float = 0.0
    mu_star: float

    @field_validator("state")
    @classmethod
    def _six_components(cls, value: List[float]) -> List[float]:
        if len(value) != 6:
            raise ValueError(f"state must have 6 components, got {len(value)}")
        return value


class EllipseRecord(BaseModel):
    """Energy matrices at one phase and their planar shadow"""
    model_config = ConfigDict(extra="forbid", ser_json_inf_nan="constants")

    phase: int
    epoch: float
    state: List[float]
    energy_limit: float
    E_star: Optional[List[List[float]]] = None
    eigenvalues: Optional[List[float]] = None
    eigenvectors: Optional[List[List[float]]] = None
    condition_number: Optional[float] = None
    plane: str
    shadow: Optional[List[List[float]]] = None
    semi_axes: Optional[List[float]] = None
    error: Optional[str] = None


class EllipsoidFile(_Document):
    u_max: float
    period: float
    plane: str
    coords: Tuple[int, int]
    records: List[EllipseRecord]


class TrajectoryReport(_Document):
    """Costs, unit conversions and solver diagnostics of one trajectory"""
    objective: str
    dx0: List[float]
    period: float
    u_max: float
    j_energy: float
    j_mass: float
    delta_v_mps: float
    duty_cycle: float
    du_meters: float
    tu_seconds: float
    nodes: int
    mesh_boundaries: Optional[List[float]] = None
    solver: Optional[SolverReport] = None
    history: List[str] = Field(default_factory=list)


class SweepSample(BaseModel):
    model_config = ConfigDict(extra="forbid", ser_json_inf_nan="constants")

    psi: float
    dx0: List[float]
    J_M: float
    duty_cycle: float
    converged: bool
    iterations: int
    stop_reason: str


class SweepFailureRecord(BaseModel):
    model_config = ConfigDict(extra="forbid")

    psi: float
    reason: str


class SweepFile(_Document):
    oracle: str
    seed: int
    attempted: int
    samples: List[SweepSample]
    failures: List[SweepFailureRecord]


class ComparisonRecord(BaseModel):
    """Sample radius against the energy-ellipse radius along one ψ"""
    model_config = ConfigDict(extra="forbid", ser_json_inf_nan="constants")

    psi: float
    r_mass: Optional[float] = None
    r_energy: float
    radial_ratio: Optional[float] = None
    duty_cycle: Optional[float] = None


class ComparisonFile(_Document):
    plane: str
    records: List[ComparisonRecord]
