"""
Propagation package for fp-reach

- integrator.py: DOP853 wrapper, controlled propagation, 6-state STM
- augmented.py: state+costate flow, 12x12 STM and the energy Gramian
"""

from .augmented import (
    AugmentedArc,
    AugState12,
    GramianAccumulator,
    StmBlocks,
    augmented_eom,
    augmented_jacobian,
    propagate_augmented,
)
from .integrator import PiecewiseSolution, PropagatorConfig, integrate, propagate, propagate_with_stm6

__all__ = [
    "AugmentedArc",
    "AugState12",
    "GramianAccumulator",
    "PiecewiseSolution",
    "PropagatorConfig",
    "StmBlocks",
    "augmented_eom",
    "augmented_jacobian",
    "integrate",
    "propagate",
    "propagate_augmented",
    "propagate_with_stm6",
]
