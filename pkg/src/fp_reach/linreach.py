"""
Linearized energy-limited reachable set

Linearizing the indirect energy-optimal problem about the unforced reference
orbit gives a closed-form map from boundary deviations (δx₀, δx_f) to the
initial costate, and a quadratic energy cost J_E = ½ δx₀ᵀ E* δx₀ for
trajectories that return to their starting deviation after one period.
The energy-limited reachable set is the hyperellipsoid J_E ≤ ½ u_max² T.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from loguru import logger
from numpy.typing import ArrayLike, NDArray

from .dynamics.cr3bp import SystemParams
from .errors import (
    ConditioningError,
    ConfigurationError,
    DegenerateProjectionError,
    NullSpaceError,
)
from .periodic import ReferenceOrbit
from .propagation.augmented import AugmentedArc, AugState12, StmBlocks, propagate_augmented
from .propagation.integrator import PropagatorConfig

DEFAULT_CONDITION_CAP = 1e12
PSD_TOLERANCE = 1e-10
NULL_SPACE_TOLERANCE = 1e-9

PLANES: Dict[str, Tuple[int, int]] = {
    "xy": (0, 1),
    "xz": (0, 2),
    "yz": (1, 2),
    "vxvy": (3, 4),
    "vxvz": (3, 5),
    "vyvz": (4, 5),
}

_PERIODIC_REDUCTION = np.vstack((np.eye(6), np.eye(6)))  # [I I]ᵀ


def _svd_inverse(a: NDArray[np.float64], condition_cap: float) -> Tuple[NDArray[np.float64], float]:
    u, s, vt = np.linalg.svd(a)
    condition = float(s[0] / s[-1]) if s[-1] > 0.0 else math.inf
    if condition > condition_cap:
        raise ConditioningError(
            f"Φ_xλ condition number {condition:.3e} exceeds cap {condition_cap:.1e}", condition
        )
    return (vt.T / s) @ u.T, condition


@dataclass(frozen=True)
class BoundaryMap:
    """Linear map (δx₀, δx_f) -> δy₀ = (δx₀, δλ₀) over one arc"""
    M: NDArray[np.float64]
    condition_number: float
    x_lam: NDArray[np.float64]
    x_lam_inverse: NDArray[np.float64]

    @classmethod
    def from_stm(cls, stm: StmBlocks, condition_cap: float = DEFAULT_CONDITION_CAP) -> "BoundaryMap":
        inverse, condition = _svd_inverse(stm.x_lam, condition_cap)
        if condition > 1e-3 * condition_cap:
            logger.warning(f"Φ_xλ condition number {condition:.3e} is close to the cap {condition_cap:.1e}")
        m = np.zeros((12, 12))
        m[:6, :6] = np.eye(6)
        m[6:, :6] = -inverse @ stm.xx
        m[6:, 6:] = inverse
        return cls(m, condition, stm.x_lam.copy(), inverse)

    @property
    def reconstruction_error(self) -> float:
        """max |Φ_xλ Φ_xλ⁻¹ - I|"""
        return float(np.max(np.abs(self.x_lam @ self.x_lam_inverse - np.eye(6))))

    def initial_augmented(self, dx0: ArrayLike, dxf: ArrayLike) -> NDArray[np.float64]:
        return self.M @ np.concatenate((np.asarray(dx0, dtype=float), np.asarray(dxf, dtype=float)))


def solve_costate_bvp(
    dx0: ArrayLike,
    dxf: ArrayLike,
    stm: StmBlocks,
    condition_cap: float = DEFAULT_CONDITION_CAP,
) -> NDArray[np.float64]:
    """Initial costate steering δx₀ to δx_f in the linearized flow"""
    return BoundaryMap.from_stm(stm, condition_cap).initial_augmented(dx0, dxf)[6:]


@dataclass(frozen=True)
class EnergyQuadratic:
    """Energy matrices of one reference phase and the energy limit J*"""
    E: NDArray[np.float64]
    E_star: NDArray[np.float64]
    gammas: NDArray[np.float64]
    vectors: NDArray[np.float64]
    energy_limit: float
    boundary_map: BoundaryMap
    orbit: ReferenceOrbit

    @property
    def epoch(self) -> float:
        return self.orbit.epoch

    @property
    def _in_range(self) -> NDArray[np.bool_]:
        return self.gammas > NULL_SPACE_TOLERANCE * max(float(self.gammas[-1]), 1e-300)

    @property
    def semi_axes(self) -> NDArray[np.float64]:
        """Hyperellipsoid semi-axis lengths along the eigenvectors (inf on the null space)"""
        axes = np.full(6, np.inf)
        keep = self._in_range
        axes[keep] = np.sqrt(2.0 * self.energy_limit / self.gammas[keep])
        return axes

    @property
    def null_space(self) -> NDArray[np.float64]:
        """
        Orthonormal basis (6×k) of the zero-cost offsets

        On a periodic reference the orbit tangent f(x₀) is always here: a
        shift along the orbit returns to itself after one period without
        control.
        """
        return self.vectors[:, ~self._in_range]

    @property
    def range_inverse(self) -> NDArray[np.float64]:
        """K = Σ v vᵀ/γ over range(E*), the shape matrix of the phase-fixed ellipsoid"""
        keep = self._in_range
        v = self.vectors[:, keep]
        return _symmetric((v / self.gammas[keep]) @ v.T)

    @property
    def range_factor(self) -> NDArray[np.float64]:
        """L (6×r) with L Lᵀ = 2J* K; maps the unit ball onto the phase-fixed ellipsoid"""
        keep = self._in_range
        return self.vectors[:, keep] * np.sqrt(2.0 * self.energy_limit / self.gammas[keep])

    def phase_fixed(self, dx0: ArrayLike) -> NDArray[np.float64]:
        """δx₀ with its zero-cost component removed"""
        d = np.asarray(dx0, dtype=float)
        n = self.null_space
        return d - n @ (n.T @ d)

    def extreme_point(self, weight: ArrayLike) -> NDArray[np.float64]:
        """
        Maximizer of wᵀδx₀ over the phase-fixed ellipsoid
        {δx₀ ⟂ null, ½ δx₀ᵀE*δx₀ <= J*}
        """
        w = np.asarray(weight, dtype=float)
        k = self.range_inverse @ w
        q = float(w @ k)
        if q <= 0.0:
            raise NullSpaceError(f"weight {w} has no component on range(E*)")
        return math.sqrt(2.0 * self.energy_limit / q) * k


def _symmetric(a: NDArray[np.float64]) -> NDArray[np.float64]:
    return 0.5 * (a + a.T)


def _check_psd(name: str, a: NDArray[np.float64]) -> NDArray[np.float64]:
    eig = np.linalg.eigvalsh(a)
    if eig[0] < -PSD_TOLERANCE * max(abs(eig[-1]), 1e-300):
        raise ConditioningError(f"{name} is not positive semi-definite (min eigenvalue {eig[0]:.3e})")
    return eig


def linearization_arc(
    orbit: ReferenceOrbit,
    params: SystemParams,
    cfg: Optional[PropagatorConfig] = None,
) -> AugmentedArc:
    """Augmented flow about the unforced orbit (λ ≡ 0 nominal) over one period"""
    return propagate_augmented(
        AugState12.uncontrolled(orbit.x0), 0.0, orbit.period, params, cfg, accumulate_gramian=True
    )


def build_energy_matrices(
    orbit: ReferenceOrbit,
    params: SystemParams,
    cfg: Optional[PropagatorConfig] = None,
    condition_cap: float = DEFAULT_CONDITION_CAP,
    arc: Optional[AugmentedArc] = None,
) -> EnergyQuadratic:
    """E = Mᵀ G M, E* = [I I] E [I I]ᵀ and its eigen-decomposition"""
    arc = arc or linearization_arc(orbit, params, cfg)
    bmap = BoundaryMap.from_stm(arc.stm, condition_cap)
    e = _symmetric(bmap.M.T @ arc.gramian.G @ bmap.M)
    e_star = _symmetric(_PERIODIC_REDUCTION.T @ e @ _PERIODIC_REDUCTION)
    _check_psd("E", e)
    gammas, vectors = np.linalg.eigh(e_star)
    _check_psd("E*", e_star)
    energy_limit = 0.5 * params.u_max ** 2 * orbit.period
    logger.info(
        f"Energy matrices at epoch {orbit.epoch:.6f}: cond(Φ_xλ)={bmap.condition_number:.3e}, "
        f"eig(E*) in [{gammas[0]:.3e}, {gammas[-1]:.3e}], J*={energy_limit:.6e}"
    )
    return EnergyQuadratic(e, e_star, gammas, vectors, energy_limit, bmap, orbit)


def quadratic_cost(dx0: ArrayLike, eq: EnergyQuadratic) -> float:
    """J_E = ½ δx₀ᵀ E* δx₀"""
    d = np.asarray(dx0, dtype=float)
    return float(0.5 * d @ eq.E_star @ d)


def boundary_sample(eq: EnergyQuadratic, direction: ArrayLike) -> NDArray[np.float64]:
    """Point of the hyperellipsoid boundary along a direction"""
    d = np.asarray(direction, dtype=float)
    norm = float(np.linalg.norm(d))
    if norm == 0.0:
        raise ConfigurationError("direction must be nonzero")
    d = d / norm
    q = float(d @ eq.E_star @ d)
    if q <= NULL_SPACE_TOLERANCE * max(eq.gammas[-1], 1e-300):
        raise NullSpaceError(f"direction {d} lies in the null space of E*; linear reach is unbounded")
    return math.sqrt(2.0 * eq.energy_limit / q) * d


@dataclass(frozen=True)
class ShadowEllipse:
    """Planar shadow {p : ½ pᵀ S p <= level} of the hyperellipsoid"""
    coords: Tuple[int, int]
    S: NDArray[np.float64]
    level: float

    def level_ratio(self, point: ArrayLike) -> float:
        p = np.asarray(point, dtype=float)
        return float(0.5 * p @ self.S @ p / self.level)

    def contains(self, point: ArrayLike, rel_tol: float = 1e-8) -> bool:
        return self.level_ratio(point) <= 1.0 + rel_tol

    def radius(self, theta: ArrayLike) -> NDArray[np.float64]:
        """Boundary radius at polar angle theta"""
        th = np.asarray(theta, dtype=float)
        c, s = np.cos(th), np.sin(th)
        q = self.S[0, 0] * c * c + 2.0 * self.S[0, 1] * c * s + self.S[1, 1] * s * s
        return np.sqrt(2.0 * self.level / q)

    def radial_ratio(self, point: ArrayLike) -> float:
        """|p| divided by the boundary radius at p's polar angle"""
        return math.sqrt(max(self.level_ratio(point), 0.0))

    def polyline(self, n: int = 256) -> NDArray[np.float64]:
        """n boundary points, shape (n, 2), counter-clockwise from θ = 0"""
        theta = np.linspace(0.0, 2.0 * math.pi, n, endpoint=False)
        r = self.radius(theta)
        return np.column_stack((r * np.cos(theta), r * np.sin(theta)))

    @property
    def semi_axes(self) -> NDArray[np.float64]:
        return np.sqrt(2.0 * self.level / np.linalg.eigvalsh(self.S))

    def scaled(self, level: float) -> "ShadowEllipse":
        return ShadowEllipse(self.coords, self.S, level)


def project_ellipsoid(
    eq: EnergyQuadratic,
    coords: Sequence[int] = (0, 1),
    condition_cap: float = DEFAULT_CONDITION_CAP,
) -> ShadowEllipse:
    """
    Exact planar shadow of the phase-fixed ellipsoid

    S = (P K Pᵀ)⁻¹ with K the inverse of E* on its range. When E* is definite
    this is the Schur complement of E* on the retained coordinates; on a
    periodic reference the zero-cost phase direction is quotiented out first,
    otherwise the shadow would be an unbounded strip.
    """
    keep = [int(c) for c in coords]
    if len(keep) != 2 or len(set(keep)) != 2 or not all(0 <= c < 6 for c in keep):
        raise ConfigurationError(f"projection needs two distinct coordinates in 0..5, got {coords}")
    k = eq.range_inverse[np.ix_(keep, keep)]
    eig = np.linalg.eigvalsh(k)
    if eig[0] <= 0.0 or eig[-1] > condition_cap * eig[0]:
        raise DegenerateProjectionError(
            f"shadow on {keep} collapses: a zero-cost direction of E* lies in the plane (eigenvalues {eig})"
        )
    return ShadowEllipse((keep[0], keep[1]), _symmetric(np.linalg.inv(k)), eq.energy_limit)


def linear_control_history(
    dx0: ArrayLike,
    eq: EnergyQuadratic,
    arc: AugmentedArc,
    times: ArrayLike,
) -> NDArray[np.float64]:
    """u(t) = -δλ_v(t) = -Φ_{λv,y}(t, t₀) δy₀ for the periodic boundary condition δx_f = δx₀"""
    dy0 = eq.boundary_map.initial_augmented(dx0, dx0)
    phi = arc.stm_at(np.atleast_1d(np.asarray(times, dtype=float)))
    return -(phi[:, 9:12, :] @ dy0)


def energy_ellipsoid_sweep(
    orbit: ReferenceOrbit,
    params: SystemParams,
    phases: int = 32,
    cfg: Optional[PropagatorConfig] = None,
    condition_cap: float = DEFAULT_CONDITION_CAP,
    workers: int = 1,
) -> List[EnergyQuadratic]:
    """Energy matrices with the initial phase moved to each of `phases` epochs along the orbit"""
    if phases < 1:
        raise ConfigurationError(f"phases must be at least 1, got {phases}")
    epochs = [k * orbit.period / phases for k in range(phases)]

    def build(epoch: float) -> EnergyQuadratic:
        return build_energy_matrices(orbit.shifted(epoch, params, cfg), params, cfg, condition_cap)

    logger.info(f"Building energy ellipsoids at {phases} phases with {workers} workers")
    if workers <= 1:
        return [build(epoch) for epoch in epochs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(build, epochs))
