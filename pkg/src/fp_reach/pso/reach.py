"""
Boundary search along planar directions and the ψ sweep
"""

import math
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np
from loguru import logger
from numpy.typing import ArrayLike

from ..errors import ConfigurationError, DirectionFailedError
from .oracles import Oracle
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

FITNESS_DIRECTION = "direction"
FITNESS_DELTA_V = "delta_v"


def _score(particle: Particle, weight: DirectionWeight, mode: str) -> float:
    if not particle.feasible:
        return 0.0
    return particle.j_mass if mode == FITNESS_DELTA_V else weight.project(particle.dx0)


def evaluate(
    particle: Particle, weight: DirectionWeight, oracle: Oracle, mode: str = FITNESS_DIRECTION
) -> Particle:
    """Query the oracle; feasible particles score ψᵀδx₀ (or J_M), infeasible ones 0"""
    outcome = oracle.evaluate(particle.dx0)
    result = Particle(
        particle.dx0.copy(),
        feasible=outcome.feasible,
        evaluated=True,
        duty_cycle=outcome.duty_cycle if outcome.feasible else 0.0,
        j_mass=outcome.j_mass if outcome.feasible else math.nan,
        failure=outcome.failure,
        solution=outcome.solution,
    )
    result.fitness = _score(result, weight, mode)
    return result


@dataclass
class IterationRecord:
    iteration: int
    mode: str
    best_fitness: float
    best_duty: float
    mean_converged_fitness: float
    convergence_fraction: float
    failures: Dict[str, int] = field(default_factory=dict)


@dataclass
class DirectionResult:
    weight: DirectionWeight
    best: Particle
    log: List[IterationRecord]
    stop_reason: str

    @property
    def iterations(self) -> int:
        return len(self.log)


def _evaluate_all(
    swarm: Swarm, weight: DirectionWeight, oracle: Oracle, mode: str, pool: Optional[ThreadPoolExecutor]
) -> List[Particle]:
    if pool is None:
        return [evaluate(p, weight, oracle, mode) for p in swarm.particles]
    return list(pool.map(lambda p: evaluate(p, weight, oracle, mode), swarm.particles))


def run_direction(
    weight: DirectionWeight,
    base: ArrayLike,
    cfg: SwarmConfig,
    oracle: Oracle,
    rng: np.random.Generator,
    workers: int = 1,
    space: Optional[SearchSpace] = None,
) -> DirectionResult:
    """
    Push δx₀ outward along ψ until a stopping rule fires

    Stops after stall_limit iterations without improvement, once the best
    particle's duty cycle exceeds duty_stop, or at max_iter. Past switch_iter
    with the best duty below switch_duty the fitness becomes J_M until the
    best duty recovers. The global best is retained across iterations.
    """
    swarm = init_swarm(base, cfg, rng, space=space)
    mode = FITNESS_DIRECTION
    best: Optional[Particle] = None
    stall = 0
    infeasible_streak = 0
    log: List[IterationRecord] = []
    stop_reason = "iteration_cap"

    pool = ThreadPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        for k in range(cfg.max_iter):
            particles = _evaluate_all(swarm, weight, oracle, mode, pool)
            feasible = [p for p in particles if p.feasible]
            failures = Counter(p.failure for p in particles if not p.feasible and p.failure)

            improved = False
            for p in feasible:
                if best is None or p.fitness > best.fitness:
                    best, improved = p, True
            stall = 0 if improved else stall + 1
            infeasible_streak = 0 if feasible else infeasible_streak + 1

            log.append(
                IterationRecord(
                    iteration=k,
                    mode=mode,
                    best_fitness=best.fitness if best is not None else 0.0,
                    best_duty=best.duty_cycle if best is not None else 0.0,
                    mean_converged_fitness=(
                        float(np.mean([p.fitness for p in feasible])) if feasible else math.nan
                    ),
                    convergence_fraction=len(feasible) / len(particles),
                    failures=dict(failures),
                )
            )
            logger.debug(
                f"ψ={weight.psi:.4f} iter {k}: best {log[-1].best_fitness:.6e} duty {log[-1].best_duty:.4f} "
                f"converged {log[-1].convergence_fraction:.2f}"
            )

            if infeasible_streak >= cfg.infeasible_limit:
                raise DirectionFailedError(
                    f"ψ={weight.psi:.4f}: no feasible particle for {infeasible_streak} consecutive iterations "
                    f"(failures: {dict(failures)})"
                )
            if best is not None and best.duty_cycle > cfg.duty_stop:
                stop_reason = "duty"
                break
            if stall >= cfg.stall_limit:
                stop_reason = "stall"
                break

            if best is not None:
                lagging = k + 1 > cfg.switch_iter and best.duty_cycle < cfg.switch_duty
                if mode == FITNESS_DIRECTION and lagging:
                    mode = FITNESS_DELTA_V
                elif mode == FITNESS_DELTA_V and best.duty_cycle > cfg.switch_duty:
                    mode = FITNESS_DIRECTION
                if best.fitness != _score(best, weight, mode):
                    logger.info(f"ψ={weight.psi:.4f}: fitness switched to {mode} at iteration {k}")
                    best.fitness = _score(best, weight, mode)
                    stall = 0

            swarm.particles = particles
            swarm.best = best
            swarm = update(swarm, cfg, k + 1, rng)
    finally:
        if pool is not None:
            pool.shutdown(wait=True)

    if best is None:
        raise DirectionFailedError(f"ψ={weight.psi:.4f}: no feasible particle in {len(log)} iterations")
    logger.info(
        f"ψ={weight.psi:.4f}: stopped by {stop_reason} after {len(log)} iterations, "
        f"fitness {best.fitness:.6e}, duty {best.duty_cycle:.4f}"
    )
    return DirectionResult(weight, best, log, stop_reason)


@dataclass
class SweepFailure:
    psi: float
    reason: str


@dataclass
class SweepResult:
    samples: List[DirectionResult]
    failures: List[SweepFailure]
    attempted: int

    @property
    def psis(self) -> List[float]:
        return [r.weight.psi for r in self.samples]


def sweep(
    oracle: Oracle,
    cfg: SwarmConfig,
    directions: Optional[Sequence[DirectionWeight]] = None,
    base: Optional[ArrayLike] = None,
    workers: int = 1,
    space: Optional[SearchSpace] = None,
    bases: Optional[Sequence[ArrayLike]] = None,
) -> SweepResult:
    """
    run_direction over the ψ schedule, warm-starting each base from the
    previous direction's boundary sample

    With bases given (one per direction, e.g. the linear ellipsoid's extreme
    points) every direction starts from its own base instead.

    Directions that fail, or whose best duty cycle does not exceed
    sample_duty, are recorded as failures; the sweep continues.
    """
    weights = list(directions) if directions is not None else direction_schedule()
    seeds = np.random.SeedSequence(cfg.seed).spawn(len(weights))
    if bases is not None and len(bases) != len(weights):
        raise ConfigurationError(f"need one base per direction, got {len(bases)} for {len(weights)}")
    current_base = np.zeros(6) if base is None else np.asarray(base, dtype=float).reshape(6)
    samples: List[DirectionResult] = []
    failures: List[SweepFailure] = []

    for i, (weight, seed) in enumerate(zip(weights, seeds)):
        if bases is not None:
            current_base = np.asarray(bases[i], dtype=float).reshape(6)
        logger.info(f"Sweeping ψ={weight.psi:.4f} from base {np.array2string(current_base, precision=4)}")
        try:
            rng = np.random.default_rng(seed)
            result = run_direction(weight, current_base, cfg, oracle, rng, workers, space)
        except DirectionFailedError as e:
            logger.warning(str(e))
            failures.append(SweepFailure(weight.psi, str(e)))
            continue
        if result.best.duty_cycle <= cfg.sample_duty:
            reason = f"best duty cycle {result.best.duty_cycle:.4f} <= {cfg.sample_duty}"
            logger.warning(f"ψ={weight.psi:.4f}: {reason}")
            failures.append(SweepFailure(weight.psi, reason))
            continue
        samples.append(result)
        current_base = result.best.dx0.copy()

    logger.info(f"Sweep finished: {len(samples)} of {len(weights)} directions returned samples")
    return SweepResult(samples, failures, len(weights))
