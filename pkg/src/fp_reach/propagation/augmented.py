"""
State and costate flow

The augmented state y = (x, λ_r, λ_v) follows the indirect energy-optimal
equations with u = -λ_v. Its 12x12 state transition matrix and the Gramian
∫ Φ_{λv,y}ᵀ Φ_{λv,y} dt are integrated alongside the trajectory, the Gramian
as 78 upper-triangular entries under the same error control.
"""

from dataclasses import dataclass
from typing import Any, Optional

import numpy as np
from numpy.typing import ArrayLike, NDArray

from ..dynamics.cr3bp import SystemParams, eom_controlled, hessian_contract, jacobian
from ..errors import ConfigurationError
from ..trajectory import Piecewise
from .integrator import PropagatorConfig, integrate

_N = 12
_TRIU = np.triu_indices(_N)
_N_TRIU = _TRIU[0].size  # 78
_LAMV_ROWS = slice(9, 12)


@dataclass(frozen=True)
class AugState12:
    """State stacked with position and velocity costates"""
    x: NDArray[np.float64]
    lam_r: NDArray[np.float64]
    lam_v: NDArray[np.float64]

    @classmethod
    def from_vector(cls, y: ArrayLike) -> "AugState12":
        v = np.asarray(y, dtype=float)
        if v.shape != (_N,) or not np.all(np.isfinite(v)):
            raise ConfigurationError(f"augmented state must be a finite 12-vector, got {v}")
        return cls(v[:6].copy(), v[6:9].copy(), v[9:].copy())

    @classmethod
    def uncontrolled(cls, x: ArrayLike) -> "AugState12":
        return cls.from_vector(np.concatenate((np.asarray(x, dtype=float), np.zeros(6))))

    def as_vector(self) -> NDArray[np.float64]:
        return np.concatenate((self.x, self.lam_r, self.lam_v))

    @property
    def control(self) -> NDArray[np.float64]:
        return -self.lam_v


@dataclass(frozen=True)
class StmBlocks:
    """12x12 STM of the augmented flow with its partitions"""
    full: NDArray[np.float64]

    @property
    def xx(self) -> NDArray[np.float64]:
        return self.full[:6, :6]

    @property
    def x_lam(self) -> NDArray[np.float64]:
        return self.full[:6, 6:]

    @property
    def lam_x(self) -> NDArray[np.float64]:
        return self.full[6:, :6]

    @property
    def lam_lam(self) -> NDArray[np.float64]:
        return self.full[6:, 6:]

    @property
    def lamv_y(self) -> NDArray[np.float64]:
        """Rows mapping δy₀ to δλ_v(t)"""
        return self.full[_LAMV_ROWS, :]


@dataclass(frozen=True)
class GramianAccumulator:
    """Running value of ∫ Φ_{λv,y}ᵀ Φ_{λv,y} dt"""
    G: NDArray[np.float64]

    @classmethod
    def zero(cls) -> "GramianAccumulator":
        return cls(np.zeros((_N, _N)))

    @classmethod
    def from_triu(cls, entries: NDArray[np.float64]) -> "GramianAccumulator":
        g = np.zeros((_N, _N))
        g[_TRIU] = entries
        return cls(g + np.triu(g, 1).T)

    @property
    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(self.G)[0])


def augmented_eom(y: ArrayLike, params: SystemParams) -> NDArray[np.float64]:
    """Time derivative of (x, λ) under u = -λ_v"""
    v = np.asarray(y, dtype=float)
    x, lam = v[:6], v[6:]
    dx = eom_controlled(x, -lam[3:], params)
    dlam = -jacobian(x, params).T @ lam
    return np.concatenate((dx, dlam))


def augmented_jacobian(y: ArrayLike, params: SystemParams) -> NDArray[np.float64]:
    """∂(augmented_eom)/∂y"""
    v = np.asarray(y, dtype=float)
    x, lam = v[:6], v[6:]
    jac = jacobian(x, params)
    out = np.zeros((_N, _N))
    out[:6, :6] = jac
    out[3:6, 9:12] = -np.eye(3)
    out[6:, :6] = -hessian_contract(x, lam, params)
    out[6:, 6:] = -jac.T
    return out


@dataclass
class AugmentedArc:
    """Result of an augmented propagation with optional dense STM output"""
    t0: float
    tf: float
    final: AugState12
    stm: StmBlocks
    gramian: GramianAccumulator
    dense: Optional[Piecewise] = None

    def _require_dense(self) -> Piecewise:
        if self.dense is None:
            raise ConfigurationError("augmented arc was propagated without dense output")
        return self.dense

    def stm_at(self, t: Any) -> NDArray[np.float64]:
        """Φ(t, t0), shape (12, 12) or (m, 12, 12)"""
        z = self._require_dense()(t)
        return z[..., _N:_N + _N * _N].reshape(*np.shape(z)[:-1], _N, _N)

    def gramian_at(self, t: float) -> GramianAccumulator:
        z = self._require_dense()(t)
        if z.shape[-1] <= _N + _N * _N:
            raise ConfigurationError("augmented arc was propagated without the Gramian")
        return GramianAccumulator.from_triu(z[_N + _N * _N:])

    def state_at(self, t: Any) -> NDArray[np.float64]:
        return self._require_dense()(t)[..., :_N]


def propagate_augmented(
    y0: AugState12,
    t0: float,
    tf: float,
    params: SystemParams,
    cfg: Optional[PropagatorConfig] = None,
    accumulate_gramian: bool = True,
) -> AugmentedArc:
    """Propagate the augmented state with its STM and, when flagged, the energy Gramian"""
    cfg = cfg or PropagatorConfig()

    def rhs(t: float, z: NDArray[np.float64]) -> NDArray[np.float64]:
        y = z[:_N]
        phi = z[_N:_N + _N * _N].reshape(_N, _N)
        dphi = augmented_jacobian(y, params) @ phi
        parts = [augmented_eom(y, params), dphi.ravel()]
        if accumulate_gramian:
            p = phi[_LAMV_ROWS, :]
            parts.append((p.T @ p)[_TRIU])
        return np.concatenate(parts)

    parts0 = [y0.as_vector(), np.eye(_N).ravel()]
    if accumulate_gramian:
        parts0.append(np.zeros(_N_TRIU))
    sol = integrate(rhs, np.concatenate(parts0), t0, tf, cfg)
    zf = sol.final
    gramian = (
        GramianAccumulator.from_triu(zf[_N + _N * _N:]) if accumulate_gramian else GramianAccumulator.zero()
    )
    return AugmentedArc(
        t0=t0,
        tf=tf,
        final=AugState12.from_vector(zf[:_N]),
        stm=StmBlocks(zf[_N:_N + _N * _N].reshape(_N, _N).copy()),
        gramian=gramian,
        dense=sol.dense,
    )
