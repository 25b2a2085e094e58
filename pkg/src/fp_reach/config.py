"""
Configuration management for fp-reach

Two layers: process settings (logging, workers, output directory) read from
environment variables and .env files, and the toolkit configuration
document, a versioned JSON file validated with pydantic before any solver
runs.
"""

import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Tuple, Union

from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .dynamics.cr3bp import (
    EARTH_MOON_DU_METERS,
    EARTH_MOON_GM_TOTAL,
    EARTH_MOON_MU_KG,
    EARTH_MOON_MU_STAR,
    SystemParams,
    tu_from_primaries,
)
from .dynamics.units import u_max_from_thrust
from .errors import ConfigurationError
from .linreach import PLANES
from .ocp.ipm import IpmOptions
from .ocp.solve import SolverSettings
from .periodic import REFERENCE_PERIOD, REFERENCE_STATE
from .propagation.integrator import PropagatorConfig
from .pso.swarm import DEFAULT_N_SIGMAS, SwarmConfig

# Load environment variables from .env file
load_dotenv()

SCHEMA_VERSION = 1


@dataclass
class LoggingConfig:
    """Logging configuration"""
    level: str = field(default_factory=lambda: os.getenv("FP_LOG_LEVEL", "INFO"))
    format: str = field(default_factory=lambda: os.getenv("FP_LOG_FORMAT", "standard"))
    file: Optional[str] = field(default_factory=lambda: os.getenv("FP_LOG_FILE") or None)


@dataclass
class RuntimeConfig:
    """Process-wide execution defaults"""
    workers: int = field(default_factory=lambda: int(os.getenv("FP_WORKERS", "1")))
    output_dir: str = field(default_factory=lambda: os.getenv("FP_OUTPUT_DIR", "out"))


@dataclass
class Config:
    """Main configuration class combining all settings"""
    logging: LoggingConfig = field(default_factory=LoggingConfig)
    runtime: RuntimeConfig = field(default_factory=RuntimeConfig)

    def validate(self) -> None:
        """Validate configuration settings"""
        errors = []
        levels = ("TRACE", "DEBUG", "INFO", "SUCCESS", "WARNING", "ERROR", "CRITICAL")
        if self.logging.level.upper() not in levels:
            errors.append(f"FP_LOG_LEVEL {self.logging.level!r} is not a log level")
        if self.logging.format not in ("standard", "json"):
            errors.append(f"FP_LOG_FORMAT must be 'standard' or 'json', got {self.logging.format!r}")
        if self.runtime.workers < 1:
            errors.append("FP_WORKERS must be at least 1")
        if errors:
            raise ConfigurationError(f"Configuration errors: {', '.join(errors)}")

    def to_dict(self) -> Dict[str, Any]:
        """Convert configuration to dictionary (useful for logging/debugging)"""
        return {
            "logging": {
                "level": self.logging.level,
                "format": self.logging.format,
                "file": self.logging.file,
            },
            "runtime": {
                "workers": self.runtime.workers,
                "output_dir": self.runtime.output_dir,
            },
        }


# Global configuration instance
config = Config()


# Toolkit configuration document

class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class SystemSection(_Section):
    """CR3BP constants and the acceleration bound (u_max, or thrust + mass)"""
    mu_star: float = Field(EARTH_MOON_MU_STAR, gt=0.0, lt=1.0)
    du_meters: float = Field(EARTH_MOON_DU_METERS, gt=0.0)
    gm_total: float = Field(EARTH_MOON_GM_TOTAL, gt=0.0)
    tu_seconds: Optional[float] = Field(None, gt=0.0)
    mu_kg: float = Field(EARTH_MOON_MU_KG, gt=0.0)
    u_max: Optional[float] = Field(None, gt=0.0)
    thrust_mn: Optional[float] = Field(50.0, gt=0.0)
    spacecraft_mass_kg: Optional[float] = Field(1000.0, gt=0.0)
    singularity_floor: float = Field(1e-12, gt=0.0)

    @model_validator(mode="after")
    def _acceleration_bound(self) -> "SystemSection":
        if self.u_max is None and (self.thrust_mn is None or self.spacecraft_mass_kg is None):
            raise ValueError("give either u_max or both thrust_mn and spacecraft_mass_kg")
        return self

    def to_params(self) -> SystemParams:
        tu = self.tu_seconds
        if tu is None:
            tu = tu_from_primaries(self.du_meters, self.gm_total)
        base = SystemParams(
            mu_star=self.mu_star,
            du_meters=self.du_meters,
            tu_seconds=tu,
            mu_kg=self.mu_kg,
            singularity_floor=self.singularity_floor,
        )
        if self.u_max is not None:
            return base.with_u_max(self.u_max)
        u_max = u_max_from_thrust(self.thrust_mn, self.spacecraft_mass_kg, base, thrust_unit="mN")
        return base.with_u_max(u_max)


class OrbitSection(_Section):
    state: List[float]
    period: float = Field(gt=0.0)

    @field_validator("state")
    @classmethod
    def _six_components(cls, value: List[float]) -> List[float]:
        if len(value) != 6:
            raise ValueError(f"state must have 6 components, got {len(value)}")
        return value


class PropagatorSection(_Section):
    rel_tol: float = Field(1e-12, gt=0.0)
    abs_tol: float = Field(1e-13, gt=0.0)
    max_step: Optional[float] = Field(None, gt=0.0)
    min_step: float = Field(0.0, ge=0.0)

    def to_config(self) -> PropagatorConfig:
        kwargs: Dict[str, Any] = dict(rel_tol=self.rel_tol, abs_tol=self.abs_tol, min_step=self.min_step)
        if self.max_step is not None:
            kwargs["max_step"] = self.max_step
        return PropagatorConfig(**kwargs)


class SolverSection(_Section):
    energy_knots: int = Field(50, ge=10)
    mass_knots: int = Field(100, ge=10)
    collocation_order: Literal[3, 5, 7] = 3
    mesh_tol: float = Field(1e-10, gt=0.0)
    max_mesh_passes: int = Field(10, ge=1)
    energy_thrust_limit: bool = True
    refine: bool = True
    verify_refinements: int = Field(3, ge=0)
    max_iter: int = Field(500, ge=1)
    feasibility_tol: float = Field(1e-9, gt=0.0)
    optimality_tol: float = Field(1e-8, gt=0.0)
    correction_tol: float = Field(1e-11, gt=0.0)
    correction_max_iter: int = Field(25, ge=1)

    def to_settings(self) -> SolverSettings:
        return SolverSettings(
            energy_knots=self.energy_knots,
            mass_knots=self.mass_knots,
            collocation_order=self.collocation_order,
            mesh_tol=self.mesh_tol,
            max_mesh_passes=self.max_mesh_passes,
            energy_thrust_limit=self.energy_thrust_limit,
            refine=self.refine,
            verify_refinements=self.verify_refinements,
            ipm=IpmOptions(
                max_iter=self.max_iter,
                feasibility_tol=self.feasibility_tol,
                optimality_tol=self.optimality_tol,
            ),
        )


class LinreachSection(_Section):
    phases: int = Field(32, ge=1)
    plane: str = "xy"
    condition_cap: float = Field(1e12, gt=1.0)
    polyline_points: int = Field(256, ge=8)

    @field_validator("plane")
    @classmethod
    def _known_plane(cls, value: str) -> str:
        if value not in PLANES:
            raise ValueError(f"plane must be one of {sorted(PLANES)}, got {value!r}")
        return value


class PsoSection(_Section):
    n_particles: int = Field(40, ge=1)
    beta: float = Field(0.7, gt=0.0, lt=1.0)
    alpha_base: float = Field(0.5, gt=0.0, lt=1.0)
    init_sigma: float = Field(9e-4, gt=0.0)
    n_sigmas: Tuple[float, float, float, float, float, float] = DEFAULT_N_SIGMAS
    stall_limit: int = Field(20, ge=1)
    duty_stop: float = Field(0.95, gt=0.0, le=1.0)
    sample_duty: float = Field(0.95, gt=0.0, le=1.0)
    switch_iter: int = Field(80, ge=1)
    switch_duty: float = Field(0.85, gt=0.0, le=1.0)
    max_iter: int = Field(200, ge=1)
    infeasible_limit: int = Field(10, ge=1)
    update_form: Literal["literal", "incremental"] = "literal"
    directions: int = Field(12, ge=1)
    prior: Literal["linear", "continuation"] = "linear"
    prior_scale: float = Field(0.02, gt=0.0, lt=1.0)
    oracle: Literal["mass", "ellipsoid"] = "mass"
    min_samples: int = Field(8, ge=0)

    def to_swarm_config(self, seed: int) -> SwarmConfig:
        return SwarmConfig(
            n_particles=self.n_particles,
            beta=self.beta,
            alpha_base=self.alpha_base,
            init_sigma=self.init_sigma,
            n_sigmas=self.n_sigmas,
            stall_limit=self.stall_limit,
            duty_stop=self.duty_stop,
            sample_duty=self.sample_duty,
            switch_iter=self.switch_iter,
            switch_duty=self.switch_duty,
            max_iter=self.max_iter,
            infeasible_limit=self.infeasible_limit,
            update_form=self.update_form,
            seed=seed,
        )


class ToolkitConfig(_Section):
    """Versioned toolkit configuration document"""
    schema_version: Literal[1] = SCHEMA_VERSION
    system: SystemSection = Field(default_factory=SystemSection)
    orbit: Optional[OrbitSection] = None
    orbit_path: Optional[str] = None
    propagator: PropagatorSection = Field(default_factory=PropagatorSection)
    solver: SolverSection = Field(default_factory=SolverSection)
    linreach: LinreachSection = Field(default_factory=LinreachSection)
    pso: PsoSection = Field(default_factory=PsoSection)
    output_dir: Optional[str] = None
    seed: int = Field(0, ge=0)
    workers: Optional[int] = Field(None, ge=1)

    @model_validator(mode="after")
    def _single_orbit_source(self) -> "ToolkitConfig":
        if self.orbit is not None and self.orbit_path is not None:
            raise ValueError("give either orbit or orbit_path, not both")
        return self

    @property
    def params(self) -> SystemParams:
        return self.system.to_params()

    @property
    def output_path(self) -> Path:
        return Path(self.output_dir or config.runtime.output_dir)

    @property
    def worker_count(self) -> int:
        return self.workers or config.runtime.workers

    def orbit_guess(self) -> Tuple[List[float], float]:
        """Inline orbit state and period, defaulting to the reference orbit"""
        if self.orbit is not None:
            return list(self.orbit.state), self.orbit.period
        return [float(v) for v in REFERENCE_STATE], REFERENCE_PERIOD


def format_validation_error(error: ValidationError) -> str:
    """One line per failing field, naming its location"""
    parts = []
    for item in error.errors():
        loc = ".".join(str(part) for part in item["loc"]) or "<root>"
        parts.append(f"{loc}: {item['msg']}")
    return "; ".join(parts)


def parse_toolkit_config(document: Union[str, bytes, Dict[str, Any]]) -> ToolkitConfig:
    """Validate a JSON text or mapping into a ToolkitConfig"""
    try:
        if isinstance(document, (str, bytes)):
            return ToolkitConfig.model_validate_json(document)
        return ToolkitConfig.model_validate(document)
    except ValidationError as e:
        raise ConfigurationError(f"Invalid configuration: {format_validation_error(e)}") from e


def load_toolkit_config(path: Optional[Union[str, Path]] = None, **overrides: Any) -> ToolkitConfig:
    """
    Read and validate a configuration file

    Without a path the built-in Earth-Moon defaults are used. Keyword
    overrides (seed, output_dir, workers) replace top-level fields after
    validation of the file.
    """
    if path is None:
        cfg = ToolkitConfig()
    else:
        file = Path(path)
        if not file.is_file():
            raise ConfigurationError(f"configuration file not found: {file}")
        cfg = parse_toolkit_config(file.read_text(encoding="utf-8"))
    updates = {k: v for k, v in overrides.items() if v is not None}
    if updates:
        cfg = parse_toolkit_config({**cfg.model_dump(), **updates})
    return cfg
