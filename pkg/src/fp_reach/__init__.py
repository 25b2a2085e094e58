"""
fp-reach

Low-thrust forced periodic trajectories about a reference orbit in the
Earth-Moon circular restricted three-body problem, and the reachable sets
they span: linearized energy-limited hyperellipsoids and particle-swarm
samples of the thrust-limited mass-optimal boundary.
"""

__version__ = "0.1.0"

from .config import Config, ToolkitConfig, load_toolkit_config
from .dynamics import SystemParams
from .periodic import ReferenceOrbit, differential_correct

__all__ = [
    "Config",
    "ReferenceOrbit",
    "SystemParams",
    "ToolkitConfig",
    "differential_correct",
    "load_toolkit_config",
]
