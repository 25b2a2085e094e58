"""
Particle swarm package for fp-reach

- swarm.py: configuration, particles, initialization and the update rule
- oracles.py: mass-optimal and analytic-ellipsoid feasibility oracles
- reach.py: per-direction boundary search and the ψ sweep
"""

from .oracles import EllipsoidOracle, MassOptimalOracle, Oracle, OracleOutcome, classify_failure
from .reach import DirectionResult, IterationRecord, SweepFailure, SweepResult, evaluate, run_direction, sweep
from .swarm import (
    DirectionWeight,
    Particle,
    SearchSpace,
    Swarm,
    SwarmConfig,
    direction_schedule,
    init_swarm,
    update,
)

__all__ = [
    "DirectionResult",
    "DirectionWeight",
    "EllipsoidOracle",
    "IterationRecord",
    "MassOptimalOracle",
    "Oracle",
    "OracleOutcome",
    "Particle",
    "SearchSpace",
    "Swarm",
    "SwarmConfig",
    "SweepFailure",
    "SweepResult",
    "classify_failure",
    "direction_schedule",
    "evaluate",
    "init_swarm",
    "run_direction",
    "sweep",
    "update",
]
