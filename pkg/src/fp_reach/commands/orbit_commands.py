"""
Reference orbit commands
"""

from typing import Any, Dict

from loguru import logger

from ..config import ToolkitConfig
from ..io.files import read_orbit, write_orbit
from ..periodic import differential_correct
from .base import BaseCommand, CommandArgs, load_config

ORBIT_FILE = "orbit.json"


def cmd_correct_orbit(cfg: ToolkitConfig) -> Dict[str, Any]:
    """
    Close the configured orbit and write it with its closure residual

    An orbit_path is read as a guess and corrected again; an already closed
    orbit returns at the first iteration and is re-emitted unchanged.
    """
    if cfg.orbit_path is not None:
        loaded = read_orbit(cfg.orbit_path)
        state, period = list(loaded.x0), loaded.period
    else:
        state, period = cfg.orbit_guess()
    orbit = differential_correct(
        state,
        period,
        cfg.params,
        tol=cfg.solver.correction_tol,
        max_iter=cfg.solver.correction_max_iter,
    )
    path = write_orbit(orbit, cfg.params, cfg.output_path / ORBIT_FILE)
    logger.info(f"Orbit written to {path}: period {orbit.period}, residual {orbit.closure_residual:.3e}")
    return {
        "state": [float(v) for v in orbit.x0],
        "period": orbit.period,
        "closure_residual": orbit.closure_residual,
        "files": [path],
    }


class CorrectOrbitCommand(BaseCommand):
    """Differential correction of the reference orbit"""

    @property
    def name(self) -> str:
        return "correct-orbit"

    @property
    def description(self) -> str:
        return "Close a periodic reference orbit by fixed-period differential correction"

    def _execute_impl(self, args: CommandArgs) -> Dict[str, Any]:
        return cmd_correct_orbit(load_config(args))
