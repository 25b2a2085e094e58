"""
Deterministic emission and reading of toolkit files

JSON for structured documents, CSV for numeric series. CSV floats are
written with 17 significant digits and read back with the round-trip
parser, so re-reading a file reproduces the in-memory values exactly.
"""

import math
import threading
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Type, TypeVar, Union

import numpy as np
import pandas as pd
from loguru import logger
from numpy.typing import ArrayLike, NDArray
from pydantic import BaseModel, ValidationError

from ..config import format_validation_error
from ..dynamics.cr3bp import SystemParams
from ..errors import ConfigurationError
from ..linreach import ShadowEllipse
from ..ocp.lgl import node_weights
from ..periodic import ReferenceOrbit
from ..pso.reach import SweepResult
from ..trajectory import Trajectory
from .schemas import (
    ComparisonFile,
    ComparisonRecord,
    EllipsoidFile,
    OrbitFile,
    SweepFailureRecord,
    SweepFile,
    SweepSample,
    TrajectoryReport,
)

PathLike = Union[str, Path]
Model = TypeVar("Model", bound=BaseModel)

FLOAT_FORMAT = "%.17g"
TRAJECTORY_COLUMNS = ["t", "x", "y", "z", "vx", "vy", "vz", "ux", "uy", "uz", "w"]
POLYLINE_COLUMNS = ["phase", "epoch", "p1", "p2"]
BOUNDARY_COLUMNS = ["psi", "x", "y", "z", "vx", "vy", "vz", "duty_cycle"]

_locks: Dict[Path, threading.Lock] = {}
_locks_guard = threading.Lock()


def _lock_for(path: Path) -> threading.Lock:
    key = path.resolve()
    with _locks_guard:
        return _locks.setdefault(key, threading.Lock())


def _prepare(path: PathLike) -> Path:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    return p


def write_json(model: BaseModel, path: PathLike) -> Path:
    p = _prepare(path)
    with _lock_for(p):
        p.write_text(model.model_dump_json(indent=2) + "\n", encoding="utf-8")
    logger.debug(f"Wrote {p}")
    return p


def read_json(path: PathLike, model: Type[Model]) -> Model:
    p = Path(path)
    if not p.is_file():
        raise ConfigurationError(f"file not found: {p}")
    try:
        return model.model_validate_json(p.read_text(encoding="utf-8"))
    except ValidationError as e:
        raise ConfigurationError(f"Invalid {model.__name__} in {p}: {format_validation_error(e)}") from e


def write_csv(frame: pd.DataFrame, path: PathLike) -> Path:
    p = _prepare(path)
    with _lock_for(p):
        frame.to_csv(p, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    logger.debug(f"Wrote {p} ({len(frame)} rows)")
    return p


def read_csv(path: PathLike) -> pd.DataFrame:
    p = Path(path)
    if not p.is_file():
        raise ConfigurationError(f"file not found: {p}")
    return pd.read_csv(p, float_precision="round_trip")


# Orbits

def write_orbit(orbit: ReferenceOrbit, params: SystemParams, path: PathLike) -> Path:
    document = OrbitFile(
        state=[float(v) for v in orbit.x0],
        period=float(orbit.period),
        closure_residual=float(orbit.closure_residual),
        epoch=float(orbit.epoch),
        mu_star=params.mu_star,
    )
    return write_json(document, path)


def read_orbit(path: PathLike) -> ReferenceOrbit:
    document = read_json(path, OrbitFile)
    return ReferenceOrbit(
        np.array(document.state), document.period, document.closure_residual, document.epoch
    )


# Trajectories

def trajectory_weights(traj: Trajectory) -> NDArray[np.float64]:
    """Node quadrature weights: LGL on a collocation mesh, trapezoid otherwise"""
    if traj.mesh is not None and traj.mesh.n_nodes == traj.times.size:
        return node_weights(traj.mesh)
    if traj.times.size < 2:
        return np.zeros(traj.times.size)
    h = np.diff(traj.times)
    w = np.zeros(traj.times.size)
    w[:-1] += 0.5 * h
    w[1:] += 0.5 * h
    return w


def trajectory_frame(traj: Trajectory) -> pd.DataFrame:
    data = np.column_stack((traj.times, traj.states, traj.controls, trajectory_weights(traj)))
    return pd.DataFrame(data, columns=TRAJECTORY_COLUMNS)


def trajectory_report(traj: Trajectory, dx0: ArrayLike, params: SystemParams) -> TrajectoryReport:
    return TrajectoryReport(
        objective=traj.objective or "none",
        dx0=[float(v) for v in np.asarray(dx0, dtype=float).reshape(6)],
        period=traj.duration,
        u_max=params.u_max,
        j_energy=float(traj.j_energy),
        j_mass=float(traj.j_mass),
        delta_v_mps=float(traj.j_mass) * params.velocity_unit,
        duty_cycle=traj.duty_cycle(params.u_max),
        du_meters=params.du_meters,
        tu_seconds=params.tu_seconds,
        nodes=int(traj.times.size),
        mesh_boundaries=[float(b) for b in traj.mesh.boundaries] if traj.mesh is not None else None,
        solver=traj.report,
        history=list(traj.history),
    )


def write_trajectory(
    traj: Trajectory,
    dx0: ArrayLike,
    params: SystemParams,
    csv_path: PathLike,
    report_path: PathLike,
) -> TrajectoryReport:
    """Node table as CSV plus the cost/diagnostic report as JSON"""
    write_csv(trajectory_frame(traj), csv_path)
    report = trajectory_report(traj, dx0, params)
    write_json(report, report_path)
    logger.info(
        f"Trajectory written: J_M {report.j_mass:.6e} DU/TU ({report.delta_v_mps:.4f} m/s), "
        f"duty cycle {report.duty_cycle:.4f}"
    )
    return report


def read_trajectory(csv_path: PathLike) -> pd.DataFrame:
    frame = read_csv(csv_path)
    missing = [c for c in TRAJECTORY_COLUMNS if c not in frame.columns]
    if missing:
        raise ConfigurationError(f"{csv_path}: missing trajectory columns {missing}")
    return frame


def read_trajectory_report(path: PathLike) -> TrajectoryReport:
    return read_json(path, TrajectoryReport)


# Ellipsoids

def polyline_frame(polylines: Iterable[Tuple[int, float, NDArray[np.float64]]]) -> pd.DataFrame:
    rows: List[NDArray[np.float64]] = []
    for phase, epoch, points in polylines:
        block = np.column_stack((np.full(len(points), phase), np.full(len(points), epoch), points))
        rows.append(block)
    data = np.vstack(rows) if rows else np.zeros((0, 4))
    frame = pd.DataFrame(data, columns=POLYLINE_COLUMNS)
    frame["phase"] = frame["phase"].astype(int)
    return frame


def write_ellipsoids(
    document: EllipsoidFile,
    polylines: Sequence[Tuple[int, float, NDArray[np.float64]]],
    json_path: PathLike,
    csv_path: PathLike,
) -> None:
    write_json(document, json_path)
    write_csv(polyline_frame(polylines), csv_path)
    logger.info(f"Ellipsoids written: {len(document.records)} phases, plane {document.plane}")


def read_ellipsoids(json_path: PathLike) -> EllipsoidFile:
    return read_json(json_path, EllipsoidFile)


# Sweeps

def sweep_document(result: SweepResult, oracle: str, seed: int) -> SweepFile:
    samples = [
        SweepSample(
            psi=r.weight.psi,
            dx0=[float(v) for v in r.best.dx0],
            J_M=float(r.best.j_mass),
            duty_cycle=float(r.best.duty_cycle),
            converged=bool(r.best.feasible),
            iterations=r.iterations,
            stop_reason=r.stop_reason,
        )
        for r in result.samples
    ]
    failures = [SweepFailureRecord(psi=f.psi, reason=f.reason) for f in result.failures]
    return SweepFile(oracle=oracle, seed=seed, attempted=result.attempted, samples=samples, failures=failures)


def comparison_document(
    result: SweepResult,
    shadow: ShadowEllipse,
    psis: Sequence[float],
    plane: str = "xy",
) -> ComparisonFile:
    """
    One record per scheduled ψ: the sample's planar radius r_mass, the shadow
    radius r_energy at the sample's polar angle (at ψ when no sample), and
    their ratio
    """
    by_psi = {r.weight.psi: r for r in result.samples}
    i, j = shadow.coords
    records = []
    for psi in psis:
        sample = by_psi.get(psi)
        if sample is None:
            records.append(ComparisonRecord(psi=psi, r_energy=float(shadow.radius(psi))))
            continue
        p = sample.best.dx0[[i, j]]
        r_mass = float(np.hypot(p[0], p[1]))
        theta = math.atan2(p[1], p[0]) if r_mass > 0.0 else psi
        r_energy = float(shadow.radius(theta))
        records.append(
            ComparisonRecord(
                psi=psi,
                r_mass=r_mass,
                r_energy=r_energy,
                radial_ratio=r_mass / r_energy,
                duty_cycle=float(sample.best.duty_cycle),
            )
        )
    return ComparisonFile(plane=plane, records=records)


def boundary_frame(result: SweepResult) -> pd.DataFrame:
    rows = [[r.weight.psi, *r.best.dx0, r.best.duty_cycle] for r in result.samples]
    table = np.array(rows, dtype=float).reshape(-1, len(BOUNDARY_COLUMNS))
    return pd.DataFrame(table, columns=BOUNDARY_COLUMNS)


def write_sweep(
    result: SweepResult,
    shadow: ShadowEllipse,
    out_dir: PathLike,
    oracle: str,
    seed: int,
    psis: Optional[Sequence[float]] = None,
    plane: str = "xy",
) -> ComparisonFile:
    """sweep.json, sweep_boundary.csv and comparison.json under out_dir"""
    out = Path(out_dir)
    write_json(sweep_document(result, oracle, seed), out / "sweep.json")
    write_csv(boundary_frame(result), out / "sweep_boundary.csv")
    scheduled = list(psis) if psis is not None else [r.weight.psi for r in result.samples] + [
        f.psi for f in result.failures
    ]
    comparison = comparison_document(result, shadow, sorted(scheduled), plane)
    write_json(comparison, out / "comparison.json")
    logger.info(f"Sweep written to {out}: {len(result.samples)} samples, {len(result.failures)} failures")
    return comparison


def read_sweep(path: PathLike) -> SweepFile:
    return read_json(path, SweepFile)


def read_comparison(path: PathLike) -> ComparisonFile:
    return read_json(path, ComparisonFile)
