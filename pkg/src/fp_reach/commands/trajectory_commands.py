"""
Trajectory optimization command
"""

from typing import Any, Dict, List, Literal, Type

import numpy as np
from pydantic import field_validator

from ..config import ToolkitConfig
from ..io.files import write_trajectory
from ..ocp.solve import generate_optimal
from .base import BaseCommand, CommandArgs, load_config, resolve_orbit

TRAJECTORY_FILE = "trajectory.csv"
REPORT_FILE = "trajectory_report.json"


def cmd_optimize(cfg: ToolkitConfig, dx0: List[float], objective: str = "mass") -> Dict[str, Any]:
    """
    Verified forced-periodic trajectory for x₀ = x_ref + δx₀

    Staged failures propagate as StageError; a verification failure keeps
    its exit status.
    """
    orbit = resolve_orbit(cfg)
    params = cfg.params
    traj = generate_optimal(
        np.asarray(dx0, dtype=float),
        orbit,
        params,
        cfg.solver.to_settings(),
        objective,
        cfg.propagator.to_config(),
    )
    out = cfg.output_path
    report = write_trajectory(traj, dx0, params, out / TRAJECTORY_FILE, out / REPORT_FILE)
    return {
        "objective": objective,
        "j_energy": report.j_energy,
        "j_mass": report.j_mass,
        "delta_v_mps": report.delta_v_mps,
        "duty_cycle": report.duty_cycle,
        "files": [out / TRAJECTORY_FILE, out / REPORT_FILE],
    }


class OptimizeArgs(CommandArgs):
    dx0: List[float]
    objective: Literal["energy", "mass"] = "mass"

    @field_validator("dx0")
    @classmethod
    def _six_components(cls, value: List[float]) -> List[float]:
        if len(value) != 6:
            raise ValueError(f"dx0 must have 6 components, got {len(value)}")
        return value


class OptimizeCommand(BaseCommand):
    """Energy- or mass-optimal forced-periodic trajectory"""

    @property
    def name(self) -> str:
        return "optimize"

    @property
    def description(self) -> str:
        return "Solve, refine and verify the forced-periodic trajectory for one initial-state offset"

    @property
    def input_model(self) -> Type[CommandArgs]:
        return OptimizeArgs

    def _execute_impl(self, args: OptimizeArgs) -> Dict[str, Any]:
        return cmd_optimize(load_config(args), args.dx0, args.objective)
