"""
Feasibility and fitness oracles for the swarm

An oracle answers, for one δx₀, whether a thrust-limited forced-periodic
trajectory exists and at what duty cycle. Failures never escape: they are
classified and turned into infeasible outcomes.
"""

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Any, Optional

import numpy as np
from loguru import logger
from numpy.typing import ArrayLike, NDArray

from ..dynamics.cr3bp import SystemParams
from ..errors import (
    FpReachError,
    MeshRefinementError,
    NlpConvergenceError,
    StageError,
    VerificationError,
)
from ..linreach import EnergyQuadratic
from ..ocp.solve import SolverSettings, generate_mass_optimal
from ..periodic import ReferenceOrbit

FAILURE_KINDS = ("nlp_nonconvergence", "verification", "thrust_bound", "other")


@dataclass
class OracleOutcome:
    feasible: bool
    j_mass: float = math.nan
    duty_cycle: float = 0.0
    failure: Optional[str] = None
    message: str = ""
    solution: Optional[Any] = field(default=None, repr=False)


def classify_failure(error: BaseException, thrust_tol: float = 1e-6) -> str:
    """Map an oracle exception onto the failure taxonomy"""
    cause = error.cause if isinstance(error, StageError) else error
    if isinstance(cause, (NlpConvergenceError, MeshRefinementError)):
        return "nlp_nonconvergence"
    if isinstance(cause, VerificationError):
        report = cause.report
        violation = getattr(report, "thrust_violation", None)
        if violation is not None and violation > thrust_tol:
            return "thrust_bound"
        return "verification"
    return "other"


class Oracle(ABC):
    """Base class for swarm oracles"""

    @property
    @abstractmethod
    def name(self) -> str:
        pass

    @property
    @abstractmethod
    def description(self) -> str:
        pass

    def evaluate(self, dx0: ArrayLike) -> OracleOutcome:
        """Evaluate one offset; any failure becomes an infeasible outcome"""
        try:
            return self._evaluate_impl(np.asarray(dx0, dtype=float))
        except FpReachError as e:
            kind = classify_failure(e)
            logger.warning(f"{self.name} oracle: infeasible ({kind}): {e}")
            return OracleOutcome(False, failure=kind, message=str(e))
        except Exception as e:
            logger.warning(f"{self.name} oracle: unexpected failure: {e}")
            return OracleOutcome(False, failure="other", message=str(e))

    @abstractmethod
    def _evaluate_impl(self, dx0: NDArray[np.float64]) -> OracleOutcome:
        pass


class MassOptimalOracle(Oracle):
    """Full pipeline: energy solve, mass solve, refinement and verification"""

    def __init__(
        self,
        orbit: ReferenceOrbit,
        params: SystemParams,
        settings: Optional[SolverSettings] = None,
        keep_solutions: bool = False,
    ):
        self.orbit = orbit
        self.params = params
        self.settings = settings or SolverSettings()
        self.keep_solutions = keep_solutions

    @property
    def name(self) -> str:
        return "mass-optimal"

    @property
    def description(self) -> str:
        return "Feasible iff the verified mass-optimal forced-periodic trajectory exists"

    def _evaluate_impl(self, dx0: NDArray[np.float64]) -> OracleOutcome:
        traj = generate_mass_optimal(dx0, self.orbit, self.params, self.settings)
        return OracleOutcome(
            True,
            j_mass=traj.j_mass,
            duty_cycle=traj.duty_cycle(self.params.u_max),
            solution=traj if self.keep_solutions else None,
        )


class EllipsoidOracle(Oracle):
    """Analytic stand-in: feasible iff ½ δxᵀE*δx <= J*, duty cycle J_E/J*"""

    def __init__(self, e_star: ArrayLike, energy_limit: float, period: float):
        self.e_star = np.asarray(e_star, dtype=float)
        self.energy_limit = float(energy_limit)
        self.period = float(period)
        self.u_max = math.sqrt(2.0 * self.energy_limit / self.period)

    @classmethod
    def from_energy_quadratic(cls, eq: EnergyQuadratic) -> "EllipsoidOracle":
        return cls(eq.E_star, eq.energy_limit, eq.orbit.period)

    @property
    def name(self) -> str:
        return "ellipsoid"

    @property
    def description(self) -> str:
        return "Linearized energy-limited reachable set used as a feasibility test"

    def _evaluate_impl(self, dx0: NDArray[np.float64]) -> OracleOutcome:
        duty = 0.5 * float(dx0 @ self.e_star @ dx0) / self.energy_limit
        if duty > 1.0 + 1e-12:
            return OracleOutcome(False, failure="thrust_bound", message=f"energy ratio {duty:.6f} > 1")
        return OracleOutcome(True, j_mass=duty * self.u_max * self.period, duty_cycle=duty)
