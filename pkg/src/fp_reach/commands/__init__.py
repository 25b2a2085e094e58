"""
Commands package for fp-reach

One class per CLI command:
- orbit_commands.py: reference orbit correction
- reach_commands.py: energy ellipsoids and the PSO reachable-set sweep
- trajectory_commands.py: energy/mass-optimal trajectory generation
"""

from .base import BaseCommand, CommandArgs, load_config, resolve_orbit
from .orbit_commands import CorrectOrbitCommand, cmd_correct_orbit
from .reach_commands import (
    EllipsoidArgs,
    EnergyEllipsoidCommand,
    SweepReachableCommand,
    cmd_energy_ellipsoid,
    cmd_sweep_reachable,
)
from .trajectory_commands import OptimizeArgs, OptimizeCommand, cmd_optimize

# Registry of all available commands
AVAILABLE_COMMANDS = [
    CorrectOrbitCommand(),
    EnergyEllipsoidCommand(),
    OptimizeCommand(),
    SweepReachableCommand(),
]

__all__ = [
    "AVAILABLE_COMMANDS",
    "BaseCommand",
    "CommandArgs",
    "CorrectOrbitCommand",
    "EllipsoidArgs",
    "EnergyEllipsoidCommand",
    "OptimizeArgs",
    "OptimizeCommand",
    "SweepReachableCommand",
    "cmd_correct_orbit",
    "cmd_energy_ellipsoid",
    "cmd_optimize",
    "cmd_sweep_reachable",
    "load_config",
    "resolve_orbit",
]
