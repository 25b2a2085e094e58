"""
Accelerated particle swarm state and update rule

Particles are initial-state offsets δx₀. Each iteration moves every particle
toward the global best g and adds Gaussian exploration noise whose scale
decays as α = α_base^k:

    literal:      δx⁺ = β (g - δx) + α N
    incremental:  δx⁺ = δx + β (g - δx) + α N

A SearchSpace optionally confines particles to a subspace (the offsets
with no orbit-phase component) and replaces the componentwise noise with
noise shaped by the linear energy ellipsoid.
"""

import math
from dataclasses import dataclass, field, replace
from typing import Any, List, Optional, Sequence, Tuple

import numpy as np
from numpy.typing import ArrayLike, NDArray

from ..errors import ConfigurationError

UPDATE_FORMS = ("literal", "incremental")
DEFAULT_N_SIGMAS = (8e-3, 8e-4, 6e-3, 8e-3, 1e-2, 4e-3)


@dataclass(frozen=True)
class SwarmConfig:
    """Swarm size, update coefficients and stopping rules"""
    n_particles: int = 40
    beta: float = 0.7
    alpha_base: float = 0.5
    init_sigma: float = 9e-4
    n_sigmas: Tuple[float, ...] = DEFAULT_N_SIGMAS
    stall_limit: int = 20
    duty_stop: float = 0.95
    sample_duty: float = 0.95
    switch_iter: int = 80
    switch_duty: float = 0.85
    max_iter: int = 200
    infeasible_limit: int = 10
    update_form: str = "literal"
    seed: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "n_sigmas", tuple(float(s) for s in self.n_sigmas))
        errors = []
        if self.n_particles < 1:
            errors.append("n_particles must be at least 1")
        if not 0.0 < self.beta < 1.0:
            errors.append(f"beta must lie in (0, 1), got {self.beta}")
        if not 0.0 < self.alpha_base < 1.0:
            errors.append(f"alpha_base must lie in (0, 1), got {self.alpha_base}")
        if not self.init_sigma > 0.0:
            errors.append(f"init_sigma must be positive, got {self.init_sigma}")
        if len(self.n_sigmas) != 6 or not all(s > 0.0 for s in self.n_sigmas):
            errors.append(f"n_sigmas must be 6 positive values, got {self.n_sigmas}")
        if self.update_form not in UPDATE_FORMS:
            errors.append(
                f"update_form must be one of {UPDATE_FORMS}, got {self.update_form!r}"
            )
        for name in ("stall_limit", "switch_iter", "max_iter", "infeasible_limit"):
            if getattr(self, name) < 1:
                errors.append(f"{name} must be at least 1")
        for name in ("duty_stop", "sample_duty", "switch_duty"):
            if not 0.0 < getattr(self, name) <= 1.0:
                errors.append(f"{name} must lie in (0, 1]")
        if errors:
            raise ConfigurationError(f"Invalid swarm configuration: {', '.join(errors)}")

    def alpha(self, k: int) -> float:
        return self.alpha_base ** k


@dataclass(frozen=True)
class DirectionWeight:
    """Planar fitness weight ψ = (cos ψ, sin ψ, 0, 0, 0, 0)"""
    psi: float

    @property
    def vector(self) -> NDArray[np.float64]:
        return np.array([math.cos(self.psi), math.sin(self.psi), 0.0, 0.0, 0.0, 0.0])

    def project(self, dx0: ArrayLike) -> float:
        return float(self.vector @ np.asarray(dx0, dtype=float))


def direction_schedule(count: int = 12) -> List[DirectionWeight]:
    """ψ = 0, 2π/count, ... (π/6 steps for the default 12)"""
    return [DirectionWeight(2.0 * math.pi * i / count) for i in range(count)]


@dataclass
class Particle:
    dx0: NDArray[np.float64]
    fitness: float = 0.0
    feasible: bool = False
    evaluated: bool = False
    duty_cycle: float = 0.0
    j_mass: float = math.nan
    failure: Optional[str] = None
    solution: Optional[Any] = field(default=None, repr=False)

    def __post_init__(self) -> None:
        self.dx0 = np.asarray(self.dx0, dtype=float).reshape(6)


@dataclass(frozen=True)
class SearchSpace:
    """
    Admissible offsets and the shape of the exploration noise

    projector maps δx₀ onto the admissible subspace (None admits every
    offset). noise_factor L, when set, replaces the componentwise sigmas:
    draws are noise_scale · L z with z ~ N(0, I) for both the initial
    spread and N.
    """
    projector: Optional[NDArray[np.float64]] = None
    noise_factor: Optional[NDArray[np.float64]] = None
    noise_scale: float = 1.0

    def __post_init__(self) -> None:
        if not self.noise_scale > 0.0:
            raise ConfigurationError(
                f"noise_scale must be positive, got {self.noise_scale}"
            )

    @classmethod
    def excluding(cls, basis: ArrayLike) -> "SearchSpace":
        """Offsets orthogonal to the columns of an orthonormal basis"""
        n = np.asarray(basis, dtype=float).reshape(6, -1)
        return cls(projector=np.eye(6) - n @ n.T)

    @classmethod
    def linear_prior(cls, eq: Any, scale: float = 0.02) -> "SearchSpace":
        """Phase-fixed offsets with noise shaped like the energy ellipsoid of eq"""
        n = eq.null_space
        return cls(
            projector=np.eye(6) - n @ n.T,
            noise_factor=eq.range_factor,
            noise_scale=scale,
        )

    def confine(self, dx0: NDArray[np.float64]) -> NDArray[np.float64]:
        return dx0 if self.projector is None else dx0 @ self.projector.T

    def draw(
        self, rng: np.random.Generator, sigmas: ArrayLike, size: Optional[int] = None
    ) -> NDArray[np.float64]:
        """One noise vector (or size of them) under this space's shape"""
        if self.noise_factor is None:
            shape = None if size is None else (size, 6)
            return rng.normal(0.0, np.asarray(sigmas, dtype=float), size=shape)
        rank = self.noise_factor.shape[1]
        z = rng.standard_normal(rank if size is None else (size, rank))
        return self.noise_scale * (z @ self.noise_factor.T)


@dataclass
class Swarm:
    particles: List[Particle]
    g: NDArray[np.float64]
    best: Optional[Particle] = None
    iteration: int = 0
    space: SearchSpace = field(default_factory=SearchSpace)

    @property
    def positions(self) -> NDArray[np.float64]:
        return np.array([p.dx0 for p in self.particles])


def init_swarm(
    base: ArrayLike,
    cfg: SwarmConfig,
    rng: np.random.Generator,
    sigma: Optional[float] = None,
    space: Optional[SearchSpace] = None,
) -> Swarm:
    """
    n particles at base + ζ with ζ ~ N(0, σ²) componentwise, or shaped by
    the search space's noise factor when it has one
    """
    space = space or SearchSpace()
    center = space.confine(np.asarray(base, dtype=float).reshape(6))
    scale = cfg.init_sigma if sigma is None else sigma
    if scale < 0.0:
        raise ConfigurationError(f"initialization sigma must be non-negative, got {scale}")
    if scale == 0.0:
        offsets = np.zeros((cfg.n_particles, 6))
    elif space.noise_factor is not None:
        offsets = space.draw(rng, (), size=cfg.n_particles)
    else:
        offsets = rng.normal(0.0, scale, size=(cfg.n_particles, 6))
    particles = [Particle(space.confine(center + z)) for z in offsets]
    return Swarm(particles, g=center.copy(), space=space)


def update(
    swarm: Swarm,
    cfg: SwarmConfig,
    k: int,
    rng: np.random.Generator,
    alpha: Optional[float] = None,
    beta: Optional[float] = None,
    form: Optional[str] = None,
) -> Swarm:
    """
    Move every particle with the accelerated-PSO rule

    N is drawn fresh per particle from child generators spawned on the
    calling thread. alpha/beta/form override the configured schedule.
    """
    g = swarm.best.dx0 if swarm.best is not None else swarm.g
    a = cfg.alpha(k) if alpha is None else alpha
    b = cfg.beta if beta is None else beta
    rule = form or cfg.update_form
    if rule not in UPDATE_FORMS:
        raise ConfigurationError(f"update form must be one of {UPDATE_FORMS}, got {rule!r}")
    sigmas = np.asarray(cfg.n_sigmas)
    children: Sequence[np.random.Generator] = rng.spawn(len(swarm.particles))

    moved = []
    for particle, child in zip(swarm.particles, children):
        noise = swarm.space.draw(child, sigmas)
        pull = b * (g - particle.dx0)
        dx0 = particle.dx0 + pull + a * noise if rule == "incremental" else pull + a * noise
        moved.append(Particle(swarm.space.confine(dx0)))
    return replace(
        swarm, particles=moved, g=np.array(g, dtype=float), iteration=swarm.iteration + 1
    )
