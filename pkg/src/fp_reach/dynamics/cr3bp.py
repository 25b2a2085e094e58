"""
Circular restricted three-body dynamics

Natural vector field of the third body in the canonical rotating frame, its
controlled form, first and second derivatives, and the Jacobi integral.
States are 6-vectors (r, v) in DU and DU/TU; controls are acceleration
3-vectors in DU/TU².
"""

import math
from dataclasses import dataclass, replace
from typing import Optional, Tuple

import numpy as np
from numpy.typing import ArrayLike, NDArray

from ..errors import ConfigurationError, SingularityError

State6 = NDArray[np.float64]
ControlVec = NDArray[np.float64]

EARTH_MOON_MU_STAR = 0.01215059
EARTH_MOON_DU_METERS = 3.844e8
EARTH_MOON_GM_TOTAL = 4.0350324e14  # m^3/s^2
EARTH_MOON_MU_KG = 6.04562e24
GRAVITATIONAL_CONSTANT = 6.67430e-11

# Coriolis block of the velocity partials
_CORIOLIS = np.array([[0.0, 2.0, 0.0], [-2.0, 0.0, 0.0], [0.0, 0.0, 0.0]])
_PLANAR = np.diag([1.0, 1.0, 0.0])


def tu_from_primaries(du_meters: float, gm_total: float) -> float:
    """Duration of one canonical time unit, sqrt(DU³ / G(m1+m2))"""
    return math.sqrt(du_meters ** 3 / gm_total)


# 50 mN on 1000 kg
_EARTH_MOON_U_MAX = 5e-5 / (
    EARTH_MOON_DU_METERS / tu_from_primaries(EARTH_MOON_DU_METERS, EARTH_MOON_GM_TOTAL) ** 2
)


@dataclass(frozen=True)
class SystemParams:
    """Constants of one CR3BP system plus the spacecraft acceleration bound"""
    mu_star: float = EARTH_MOON_MU_STAR
    du_meters: float = EARTH_MOON_DU_METERS
    tu_seconds: float = tu_from_primaries(EARTH_MOON_DU_METERS, EARTH_MOON_GM_TOTAL)
    u_max: float = _EARTH_MOON_U_MAX
    mu_kg: float = EARTH_MOON_MU_KG
    singularity_floor: float = 1e-12

    def __post_init__(self) -> None:
        errors = []
        if not 0.0 < self.mu_star < 1.0:
            errors.append(f"mu_star must lie in (0, 1), got {self.mu_star}")
        for name in ("du_meters", "tu_seconds", "u_max", "mu_kg", "singularity_floor"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0.0):
                errors.append(f"{name} must be positive and finite, got {value}")
        if errors:
            raise ConfigurationError(f"Invalid system parameters: {', '.join(errors)}")

    @classmethod
    def from_primaries(
        cls,
        mu_star: float,
        du_meters: float,
        gm_total: float,
        u_max: float,
        mu_kg: Optional[float] = None,
    ) -> "SystemParams":
        """Build parameters with TU derived from the primaries' GM"""
        return cls(
            mu_star=mu_star,
            du_meters=du_meters,
            tu_seconds=tu_from_primaries(du_meters, gm_total),
            u_max=u_max,
            mu_kg=mu_kg if mu_kg is not None else gm_total / GRAVITATIONAL_CONSTANT,
        )

    def with_u_max(self, u_max: float) -> "SystemParams":
        return replace(self, u_max=u_max)

    @property
    def velocity_unit(self) -> float:
        """Meters per second in one DU/TU"""
        return self.du_meters / self.tu_seconds

    @property
    def acceleration_unit(self) -> float:
        """Meters per second squared in one DU/TU²"""
        return self.du_meters / self.tu_seconds ** 2

    @property
    def primaries(self) -> Tuple[Tuple[float, NDArray[np.float64]], ...]:
        """(mass, position) of both primaries in canonical units"""
        mu = self.mu_star
        return (
            (1.0 - mu, np.array([-mu, 0.0, 0.0])),
            (mu, np.array([1.0 - mu, 0.0, 0.0])),
        )


def as_state(state: ArrayLike) -> State6:
    """Validate and convert to a float 6-vector"""
    x = np.asarray(state, dtype=float)
    if x.shape != (6,):
        raise ConfigurationError(f"state must have 6 components, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ConfigurationError(f"state has non-finite components: {x}")
    return x


def _offsets(state: NDArray[np.float64], params: SystemParams):
    """Relative positions and distances to both primaries, with the floor check"""
    r = state[:3]
    out = []
    for mass, position in params.primaries:
        d = r - position
        rho = math.sqrt(float(d @ d))
        if rho < params.singularity_floor:
            raise SingularityError(
                f"state {r} within {params.singularity_floor:g} DU of a primary (distance {rho:.3e})"
            )
        out.append((mass, d, rho))
    return out


def gravity_gradient(state: State6, params: SystemParams) -> NDArray[np.float64]:
    """Gradient of the pseudo-potential with respect to position"""
    grad = _PLANAR @ state[:3]
    for mass, d, rho in _offsets(state, params):
        grad = grad - mass * d / rho ** 3
    return grad


def eom(state: State6, params: SystemParams) -> NDArray[np.float64]:
    """Natural CR3BP time derivative F(x)"""
    v = state[3:]
    acc = gravity_gradient(state, params) + _CORIOLIS @ v
    return np.concatenate((v, acc))


def eom_controlled(state: State6, u: ControlVec, params: SystemParams) -> NDArray[np.float64]:
    """F(x) + [0; u]"""
    dx = eom(state, params)
    dx[3:] += u
    return dx


def potential_hessian(state: State6, params: SystemParams) -> NDArray[np.float64]:
    """Second partials of the pseudo-potential with respect to position"""
    hess = _PLANAR.copy()
    for mass, d, rho in _offsets(state, params):
        hess += mass * (3.0 * np.outer(d, d) / rho ** 5 - np.eye(3) / rho ** 3)
    return hess


def jacobian(state: State6, params: SystemParams) -> NDArray[np.float64]:
    """Analytic ∂F/∂x"""
    jac = np.zeros((6, 6))
    jac[:3, 3:] = np.eye(3)
    jac[3:, :3] = potential_hessian(state, params)
    jac[3:, 3:] = _CORIOLIS
    return jac


def hessian_contract(state: State6, weights: ArrayLike, params: SystemParams) -> NDArray[np.float64]:
    """
    Second derivative of wᵀF(x) with respect to x

    Only the gravitational terms are nonlinear, so the result is zero outside
    the position-position block, which contracts the third derivatives of the
    primaries' potentials with the velocity part of w.
    """
    w = np.asarray(weights, dtype=float)[3:]
    hess = np.zeros((6, 6))
    block = np.zeros((3, 3))
    for mass, d, rho in _offsets(state, params):
        wd = float(w @ d)
        block += mass * (
            3.0 * (np.outer(w, d) + np.outer(d, w) + wd * np.eye(3)) / rho ** 5
            - 15.0 * wd * np.outer(d, d) / rho ** 7
        )
    hess[:3, :3] = block
    return hess


def jacobi_constant(state: State6, params: SystemParams) -> float:
    """C = x² + y² + 2(1-μ)/r1 + 2μ/r2 - |v|²"""
    x, y = state[0], state[1]
    value = x * x + y * y
    for mass, _, rho in _offsets(state, params):
        value += 2.0 * mass / rho
    return float(value - state[3:] @ state[3:])


def _batch_offsets(states: NDArray[np.float64], params: SystemParams):
    r = states[:, :3]
    out = []
    for mass, position in params.primaries:
        d = r - position
        rho = np.sqrt(np.einsum("ij,ij->i", d, d))
        if rho.size and rho.min() < params.singularity_floor:
            k = int(np.argmin(rho))
            raise SingularityError(
                f"state {r[k]} within {params.singularity_floor:g} DU of a primary (distance {rho[k]:.3e})"
            )
        out.append((mass, d, rho[:, None]))
    return out


def eom_batch(states: ArrayLike, controls: ArrayLike, params: SystemParams) -> NDArray[np.float64]:
    """Row-wise eom_controlled for (m, 6) states and (m, 3) controls"""
    x = np.asarray(states, dtype=float)
    acc = x[:, :3] @ _PLANAR + x[:, 3:] @ _CORIOLIS.T + np.asarray(controls, dtype=float)
    for mass, d, rho in _batch_offsets(x, params):
        acc -= mass * d / rho ** 3
    return np.hstack((x[:, 3:], acc))


def jacobian_batch(states: ArrayLike, params: SystemParams) -> NDArray[np.float64]:
    """Row-wise jacobian, shape (m, 6, 6)"""
    x = np.asarray(states, dtype=float)
    m = x.shape[0]
    hess = np.broadcast_to(_PLANAR, (m, 3, 3)).copy()
    eye = np.eye(3)
    for mass, d, rho in _batch_offsets(x, params):
        r = rho[:, :, None]
        hess += mass * (3.0 * d[:, :, None] * d[:, None, :] / r ** 5 - eye / r ** 3)
    jac = np.zeros((m, 6, 6))
    jac[:, :3, 3:] = eye
    jac[:, 3:, :3] = hess
    jac[:, 3:, 3:] = _CORIOLIS
    return jac


def hessian_contract_batch(
    states: ArrayLike, weights: ArrayLike, params: SystemParams
) -> NDArray[np.float64]:
    """Row-wise hessian_contract, shape (m, 6, 6)"""
    x = np.asarray(states, dtype=float)
    w = np.asarray(weights, dtype=float)[:, 3:]
    m = x.shape[0]
    eye = np.eye(3)
    block = np.zeros((m, 3, 3))
    for mass, d, rho in _batch_offsets(x, params):
        r = rho[:, :, None]
        wd = np.einsum("ij,ij->i", w, d)[:, None, None]
        wdT = w[:, :, None] * d[:, None, :]
        block += mass * (
            3.0 * (wdT + wdT.transpose(0, 2, 1) + wd * eye) / r ** 5
            - 15.0 * wd * d[:, :, None] * d[:, None, :] / r ** 7
        )
    out = np.zeros((m, 6, 6))
    out[:, :3, :3] = block
    return out
