"""
Reachable-set commands: energy ellipsoids along the orbit and the PSO sweep
"""

from concurrent.futures import ThreadPoolExecutor
from typing import Any, Dict, List, Optional, Tuple, Type

import numpy as np
from loguru import logger
from pydantic import Field, field_validator

from ..config import ToolkitConfig
from ..errors import ConfigurationError, SolverError
from ..io.files import write_ellipsoids, write_sweep
from ..io.schemas import EllipseRecord, EllipsoidFile
from ..linreach import PLANES, EnergyQuadratic, build_energy_matrices, project_ellipsoid
from ..periodic import ReferenceOrbit
from ..pso.oracles import EllipsoidOracle, MassOptimalOracle, Oracle
from ..pso.reach import sweep
from ..pso.swarm import DirectionWeight, SearchSpace, direction_schedule
from .base import BaseCommand, CommandArgs, load_config, resolve_orbit

ELLIPSOID_FILE = "ellipsoids.json"
POLYLINE_FILE = "ellipse_polyline.csv"


def _phase_record(
    k: int,
    epoch: float,
    orbit: ReferenceOrbit,
    cfg: ToolkitConfig,
    plane: str,
) -> Tuple[EllipseRecord, Optional[np.ndarray]]:
    params = cfg.params
    shifted = orbit.shifted(epoch, params, cfg.propagator.to_config())
    base = dict(
        phase=k,
        epoch=epoch,
        state=[float(v) for v in shifted.x0],
        energy_limit=0.5 * params.u_max ** 2 * orbit.period,
        plane=plane,
    )
    try:
        eq = build_energy_matrices(shifted, params, cfg.propagator.to_config(), cfg.linreach.condition_cap)
        shadow = project_ellipsoid(eq, PLANES[plane], cfg.linreach.condition_cap)
    except SolverError as e:
        logger.warning(f"Phase {k} (epoch {epoch:.6f}): {e}")
        return EllipseRecord(**base, error=str(e)), None
    record = EllipseRecord(
        **base,
        E_star=eq.E_star.tolist(),
        eigenvalues=eq.gammas.tolist(),
        eigenvectors=eq.vectors.tolist(),
        condition_number=eq.boundary_map.condition_number,
        shadow=shadow.S.tolist(),
        semi_axes=shadow.semi_axes.tolist(),
    )
    return record, shadow.polyline(cfg.linreach.polyline_points)


def cmd_energy_ellipsoid(
    cfg: ToolkitConfig, phases: Optional[int] = None, plane: Optional[str] = None
) -> Dict[str, Any]:
    """
    Energy ellipsoid and its planar shadow at evenly spaced phases

    Conditioning failures are recorded per phase; the command fails only
    when no phase produces an ellipse.
    """
    phases = phases or cfg.linreach.phases
    plane = plane or cfg.linreach.plane
    if plane not in PLANES:
        raise ConfigurationError(f"plane must be one of {sorted(PLANES)}, got {plane!r}")
    orbit = resolve_orbit(cfg)
    epochs = [k * orbit.period / phases for k in range(phases)]
    logger.info(f"Building {phases} energy ellipsoids on plane {plane} with {cfg.worker_count} workers")

    def build(item: Tuple[int, float]):
        return _phase_record(item[0], item[1], orbit, cfg, plane)

    if cfg.worker_count > 1:
        with ThreadPoolExecutor(max_workers=cfg.worker_count) as pool:
            results = list(pool.map(build, enumerate(epochs)))
    else:
        results = [build(item) for item in enumerate(epochs)]

    records = [r for r, _ in results]
    polylines = [(r.phase, r.epoch, points) for r, points in results if points is not None]
    if not polylines:
        raise SolverError(f"no phase produced an ellipse: {[r.error for r in records]}")

    document = EllipsoidFile(
        u_max=cfg.params.u_max,
        period=orbit.period,
        plane=plane,
        coords=PLANES[plane],
        records=records,
    )
    out = cfg.output_path
    write_ellipsoids(document, polylines, out / ELLIPSOID_FILE, out / POLYLINE_FILE)
    return {
        "phases": phases,
        "plane": plane,
        "failed_phases": [r.phase for r in records if r.error is not None],
        "files": [out / ELLIPSOID_FILE, out / POLYLINE_FILE],
    }


def build_oracle(cfg: ToolkitConfig, orbit: ReferenceOrbit, eq: EnergyQuadratic) -> Oracle:
    if cfg.pso.oracle == "ellipsoid":
        return EllipsoidOracle.from_energy_quadratic(eq)
    return MassOptimalOracle(orbit, cfg.params, cfg.solver.to_settings())


def search_setup(
    cfg: ToolkitConfig, eq: EnergyQuadratic, weights: List[DirectionWeight]
) -> Tuple[SearchSpace, Optional[List[np.ndarray]]]:
    """
    Search space and per-direction bases for the sweep

    Both priors keep particles off the zero-cost phase direction. The linear
    prior also starts each ψ at the energy ellipsoid's extreme point and
    shapes the noise like the ellipsoid; continuation warm-starts from the
    previous direction with the componentwise sigmas.
    """
    if cfg.pso.prior == "continuation":
        return SearchSpace.excluding(eq.null_space), None
    bases = [eq.extreme_point(w.vector) for w in weights]
    return SearchSpace.linear_prior(eq, cfg.pso.prior_scale), bases


def cmd_sweep_reachable(cfg: ToolkitConfig) -> Dict[str, Any]:
    """
    PSO boundary samples for every ψ and their comparison with the linear
    energy-limited xy-ellipse at the same epoch
    """
    orbit = resolve_orbit(cfg)
    eq = build_energy_matrices(orbit, cfg.params, cfg.propagator.to_config(), cfg.linreach.condition_cap)
    shadow = project_ellipsoid(eq, PLANES["xy"], cfg.linreach.condition_cap)
    oracle = build_oracle(cfg, orbit, eq)
    swarm_cfg = cfg.pso.to_swarm_config(cfg.seed)
    weights = direction_schedule(cfg.pso.directions)
    space, bases = search_setup(cfg, eq, weights)

    logger.info(
        f"Sweeping {len(weights)} directions with the {oracle.name} oracle "
        f"({cfg.pso.prior} prior, seed {cfg.seed})"
    )
    result = sweep(oracle, swarm_cfg, weights, workers=cfg.worker_count, space=space, bases=bases)
    out = cfg.output_path
    comparison = write_sweep(result, shadow, out, oracle.name, cfg.seed, [w.psi for w in weights])

    failures: List[Dict[str, Any]] = [{"psi": f.psi, "reason": f.reason} for f in result.failures]
    if len(result.samples) < cfg.pso.min_samples:
        raise SolverError(
            f"only {len(result.samples)} of {result.attempted} directions returned samples "
            f"(need {cfg.pso.min_samples}); failures: {failures}"
        )
    return {
        "samples": len(result.samples),
        "attempted": result.attempted,
        "failures": failures,
        "radial_ratios": [r.radial_ratio for r in comparison.records],
        "files": [out / "sweep.json", out / "sweep_boundary.csv", out / "comparison.json"],
    }


class EllipsoidArgs(CommandArgs):
    phases: Optional[int] = Field(None, ge=1)
    plane: Optional[str] = None

    @field_validator("plane")
    @classmethod
    def _known_plane(cls, value: Optional[str]) -> Optional[str]:
        if value is not None and value not in PLANES:
            raise ValueError(f"plane must be one of {sorted(PLANES)}, got {value!r}")
        return value


class EnergyEllipsoidCommand(BaseCommand):
    """Linearized energy-limited reachable sets along the orbit"""

    @property
    def name(self) -> str:
        return "ellipsoid"

    @property
    def description(self) -> str:
        return "Energy-limited reachable hyperellipsoids and planar shadows at evenly spaced phases"

    @property
    def input_model(self) -> Type[CommandArgs]:
        return EllipsoidArgs

    def _execute_impl(self, args: EllipsoidArgs) -> Dict[str, Any]:
        return cmd_energy_ellipsoid(load_config(args), args.phases, args.plane)


class SweepReachableCommand(BaseCommand):
    """Thrust-limited boundary samples by particle swarm"""

    @property
    def name(self) -> str:
        return "sweep"

    @property
    def description(self) -> str:
        return (
            "Particle-swarm boundary samples of the thrust-limited reachable set, "
            "compared with the energy ellipse"
        )

    def _execute_impl(self, args: CommandArgs) -> Dict[str, Any]:
        return cmd_sweep_reachable(load_config(args))
