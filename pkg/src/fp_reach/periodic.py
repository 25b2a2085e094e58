"""
Reference periodic orbits

Fixed-period differential correction of a near-periodic initial state, and
the ReferenceOrbit container the reachability analyses linearize about.
"""

from dataclasses import dataclass
from typing import List, Optional

import numpy as np
from loguru import logger
from numpy.typing import ArrayLike, NDArray

from .dynamics.cr3bp import SystemParams, as_state
from .errors import ConfigurationError, CorrectionError, DivergenceError
from .propagation.integrator import PropagatorConfig, propagate, propagate_with_stm6
from .trajectory import Trajectory

# Published reference state and period of the Earth-Moon orbit used throughout
REFERENCE_STATE = np.array([
    1.06315768,
    0.000326952322,
    -0.200259761,
    0.000361619362,
    -0.176727245,
    -0.000739327422,
])
REFERENCE_PERIOD = 2.085034838884136

SINGULAR_VALUE_CUTOFF = 1e-8
DIVERGENCE_STREAK = 3


@dataclass(frozen=True)
class ReferenceOrbit:
    """Closed natural orbit: initial state, period and closure residual"""
    x0: NDArray[np.float64]
    period: float
    closure_residual: float
    epoch: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "x0", as_state(self.x0))
        if not self.period > 0.0:
            raise ConfigurationError(f"orbit period must be positive, got {self.period}")

    def shifted(
        self, epoch: float, params: SystemParams, cfg: Optional[PropagatorConfig] = None
    ) -> "ReferenceOrbit":
        """The same orbit started a time `epoch` later along the flow"""
        if epoch == 0.0:
            return self
        traj = propagate(self.x0, 0.0, epoch, params, cfg)
        return ReferenceOrbit(traj.xf, self.period, self.closure_residual, self.epoch + epoch)

    def sample(
        self, n: int, params: SystemParams, cfg: Optional[PropagatorConfig] = None
    ) -> NDArray[np.float64]:
        """n states evenly spaced in time over one period, shape (n, 6)"""
        traj = self.propagate(params, cfg)
        return traj.state_at(np.linspace(0.0, self.period, n))

    def propagate(self, params: SystemParams, cfg: Optional[PropagatorConfig] = None) -> Trajectory:
        return propagate(self.x0, 0.0, self.period, params, cfg)


def closure(x0: NDArray[np.float64], period: float, params: SystemParams, cfg: PropagatorConfig):
    """Closure defect flow(x0, T) - x0 and the monodromy matrix"""
    xf, phi = propagate_with_stm6(x0, 0.0, period, params, cfg)
    return xf - x0, phi


def differential_correct(
    guess: ArrayLike,
    period: float,
    params: SystemParams,
    tol: float = 1e-11,
    max_iter: int = 25,
    cfg: Optional[PropagatorConfig] = None,
) -> ReferenceOrbit:
    """
    Fixed-period Newton correction of the initial state

    Each step solves (Φ - I) δx₀ = -f in the minimum-norm least-squares sense,
    truncating singular values below 1e-8 σ_max; (Φ - I) is singular along the
    flow direction, so the truncated pseudo-inverse picks the shortest update.
    """
    cfg = cfg or PropagatorConfig.verification()
    x0 = as_state(guess).copy()
    residuals: List[float] = []
    growth = 0

    for iteration in range(max_iter + 1):
        f, phi = closure(x0, period, params, cfg)
        residual = float(np.linalg.norm(f))
        residuals.append(residual)
        logger.debug(f"Correction iteration {iteration}: residual {residual:.3e}")

        if residual < tol:
            logger.info(f"Orbit closed after {iteration} iterations (residual {residual:.3e})")
            return ReferenceOrbit(x0, period, residual)

        if len(residuals) > 1 and residual > residuals[-2]:
            growth += 1
            if growth >= DIVERGENCE_STREAK:
                raise DivergenceError(
                    f"closure residual grew for {DIVERGENCE_STREAK} consecutive iterations: "
                    + ", ".join(f"{r:.3e}" for r in residuals)
                )
        else:
            growth = 0

        if iteration == max_iter:
            break
        step, *_ = np.linalg.lstsq(phi - np.eye(6), -f, rcond=SINGULAR_VALUE_CUTOFF)
        x0 = x0 + step

    raise CorrectionError(
        f"differential correction did not converge in {max_iter} iterations; residual trace: "
        + ", ".join(f"{r:.3e}" for r in residuals)
    )
