"""
Adaptive Dormand-Prince propagation

Wraps SciPy's DOP853 integrator with the toolkit's tolerance settings, error
mapping and piecewise integration across control breakpoints, and provides
the controlled/uncontrolled state propagation and the 6-state variational
equations used by differential correction.
"""

import math
from dataclasses import dataclass, replace
from typing import Any, Callable, Iterable, List, Optional, Tuple

import numpy as np
from loguru import logger
from numpy.typing import ArrayLike, NDArray
from scipy.integrate import solve_ivp

from ..dynamics.cr3bp import SystemParams, as_state, eom_controlled, jacobian
from ..errors import (
    ConfigurationError,
    ControlEvaluationError,
    PropagationError,
    StepSizeUnderflowError,
)
from ..trajectory import Piecewise, TimeFunction, Trajectory, zero_control

# DOP853 silently floors rtol at 100 machine epsilons
_RTOL_FLOOR = 100.0 * np.finfo(float).eps

Rhs = Callable[[float, NDArray[np.float64]], NDArray[np.float64]]


@dataclass(frozen=True)
class PropagatorConfig:
    """Integrator tolerances and step limits"""
    rel_tol: float = 1e-12
    abs_tol: float = 1e-13
    max_step: float = math.inf
    min_step: float = 0.0
    dense_output: bool = True
    method: str = "DOP853"

    def __post_init__(self) -> None:
        errors = []
        if not self.rel_tol > 0.0:
            errors.append("rel_tol must be positive")
        if not self.abs_tol > 0.0:
            errors.append("abs_tol must be positive")
        if not self.max_step > 0.0:
            errors.append("max_step must be positive")
        if self.min_step < 0.0 or not self.min_step < self.max_step:
            errors.append("min_step must satisfy 0 <= min_step < max_step")
        if errors:
            raise ConfigurationError(f"Invalid propagator configuration: {', '.join(errors)}")

    @classmethod
    def verification(cls) -> "PropagatorConfig":
        """Tolerances used to certify solutions (rel 1e-14, abs 1e-16)"""
        return cls(rel_tol=1e-14, abs_tol=1e-16)

    @property
    def effective_rel_tol(self) -> float:
        return max(self.rel_tol, _RTOL_FLOOR)


@dataclass
class PiecewiseSolution:
    """Samples and dense output of an integration split at breakpoints"""
    times: NDArray[np.float64]
    values: NDArray[np.float64]
    dense: Optional[Piecewise]
    nfev: int

    @property
    def final(self) -> NDArray[np.float64]:
        return self.values[-1]


def _grid(t0: float, tf: float, breakpoints: Optional[Iterable[float]]) -> NDArray[np.float64]:
    interior: List[float] = []
    if breakpoints is not None:
        interior = sorted(float(b) for b in breakpoints if t0 < b < tf)
    return np.array([t0, *interior, tf])


def _ode_piece(sol: Any) -> Callable[[Any], NDArray[np.float64]]:
    return lambda t: sol(t).T


def integrate(
    rhs: Rhs,
    y0: ArrayLike,
    t0: float,
    tf: float,
    cfg: PropagatorConfig,
    breakpoints: Optional[Iterable[float]] = None,
) -> PiecewiseSolution:
    """
    Integrate y' = rhs(t, y) from t0 to tf

    Integration restarts at every breakpoint so that discontinuities in the
    right-hand side (segment-wise control polynomials) never fall inside a step.
    """
    y = np.asarray(y0, dtype=float).copy()
    if tf < t0:
        raise PropagationError(f"final time {tf} precedes initial time {t0}")
    if tf == t0:
        return PiecewiseSolution(np.array([t0]), y[None, :], None, 0)

    grid = _grid(t0, tf, breakpoints)
    times: List[NDArray[np.float64]] = []
    values: List[NDArray[np.float64]] = []
    pieces = []
    nfev = 0
    for a, b in zip(grid[:-1], grid[1:]):
        sol = solve_ivp(
            rhs,
            (a, b),
            y,
            method=cfg.method,
            rtol=cfg.effective_rel_tol,
            atol=cfg.abs_tol,
            max_step=cfg.max_step,
            dense_output=cfg.dense_output,
        )
        nfev += sol.nfev
        if not sol.success:
            if "step size" in sol.message.lower():
                raise StepSizeUnderflowError(f"step size underflow near t={sol.t[-1]:.6f}: {sol.message}")
            raise PropagationError(f"integration failed on [{a}, {b}]: {sol.message}")
        steps = np.diff(sol.t)
        if cfg.min_step > 0.0 and steps.size > 1 and steps[:-1].min() < cfg.min_step:
            raise StepSizeUnderflowError(
                f"step {steps[:-1].min():.3e} below min_step {cfg.min_step:.3e} on [{a}, {b}]"
            )
        start = 0 if not times else 1
        times.append(sol.t[start:])
        values.append(sol.y.T[start:])
        if cfg.dense_output:
            pieces.append(_ode_piece(sol.sol))
        y = sol.y[:, -1].copy()

    dense = Piecewise(grid, pieces, y.size) if cfg.dense_output else None
    return PiecewiseSolution(np.concatenate(times), np.vstack(values), dense, nfev)


def _checked_control(control: TimeFunction) -> TimeFunction:
    def evaluate(t: Any) -> NDArray[np.float64]:
        try:
            u = np.asarray(control(t), dtype=float)
        except Exception as e:
            raise ControlEvaluationError(f"control evaluation failed at t={t}: {e}") from e
        if u.shape[-1] != 3 or not np.all(np.isfinite(u)):
            raise ControlEvaluationError(f"control at t={t} is not a finite 3-vector: {u}")
        return u

    return evaluate


def propagate(
    state: ArrayLike,
    t0: float,
    tf: float,
    params: SystemParams,
    cfg: Optional[PropagatorConfig] = None,
    control: Optional[TimeFunction] = None,
    breakpoints: Optional[Iterable[float]] = None,
) -> Trajectory:
    """Propagate a state under an optional control history"""
    cfg = cfg or PropagatorConfig()
    x0 = as_state(state)
    u_fn = _checked_control(control) if control is not None else zero_control

    def rhs(t: float, x: NDArray[np.float64]) -> NDArray[np.float64]:
        return eom_controlled(x, u_fn(t), params)

    sol = integrate(rhs, x0, t0, tf, cfg, breakpoints)
    if sol.dense is not None:
        state_fn = sol.dense
    else:
        # no dense output: linear interpolation between integrator steps
        samples_t, samples_x = sol.times, sol.values

        def state_fn(t: Any) -> NDArray[np.float64]:
            cols = [np.interp(t, samples_t, samples_x[:, k]) for k in range(6)]
            return np.stack(cols, axis=-1)

    logger.debug(f"Propagated [{t0:.6f}, {tf:.6f}] in {sol.times.size} steps ({sol.nfev} evaluations)")
    controls = np.array([u_fn(float(t)) for t in sol.times])
    return Trajectory(
        times=sol.times,
        states=sol.values,
        controls=controls,
        state_fn=state_fn,
        control_fn=u_fn,
        feasible=True,
    )


def propagate_with_stm6(
    state: ArrayLike,
    t0: float,
    tf: float,
    params: SystemParams,
    cfg: Optional[PropagatorConfig] = None,
) -> Tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Final state and 6x6 STM of the natural flow"""
    cfg = cfg or PropagatorConfig()
    x0 = as_state(state)

    def rhs(t: float, z: NDArray[np.float64]) -> NDArray[np.float64]:
        x = z[:6]
        phi = z[6:].reshape(6, 6)
        return np.concatenate((eom_controlled(x, np.zeros(3), params), (jacobian(x, params) @ phi).ravel()))

    z0 = np.concatenate((x0, np.eye(6).ravel()))
    sol = integrate(rhs, z0, t0, tf, replace(cfg, dense_output=False))
    zf = sol.final
    return zf[:6].copy(), zf[6:].reshape(6, 6).copy()
