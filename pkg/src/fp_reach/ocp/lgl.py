"""
Legendre-Gauss-Lobatto tables

Node fractions on [0, 1] and the Lobatto IIIA integration matrix of one
collocation segment: X_k = X_0 + h Σ_j A[k, j] f(X_j, u_j).
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.polynomial import Polynomial
from numpy.polynomial.legendre import Legendre
from numpy.typing import NDArray

from ..errors import ConfigurationError
from ..trajectory import Mesh

SUPPORTED_ORDERS = (3, 5, 7)


def nodes_for_order(order: int) -> int:
    """LGL nodes per segment for a collocation order (3 -> 3, 5 -> 4, 7 -> 5)"""
    if order not in SUPPORTED_ORDERS:
        raise ConfigurationError(f"collocation order must be one of {SUPPORTED_ORDERS}, got {order}")
    return (order + 3) // 2


@dataclass(frozen=True)
class LglTable:
    """Nodes, quadrature weights and integration matrix on the unit interval"""
    order: int
    fractions: NDArray[np.float64]
    weights: NDArray[np.float64]
    integration: NDArray[np.float64]

    @property
    def n(self) -> int:
        return self.fractions.size

    def lagrange_basis(self, tau: NDArray[np.float64]) -> NDArray[np.float64]:
        """Values of the n Lagrange basis polynomials at fractions tau, shape (m, n)"""
        t = np.atleast_1d(np.asarray(tau, dtype=float))
        f = self.fractions
        out = np.ones((t.size, self.n))
        for j in range(self.n):
            for m in range(self.n):
                if m != j:
                    out[:, j] *= (t - f[m]) / (f[j] - f[m])
        return out


def lgl_points(n: int) -> NDArray[np.float64]:
    """n Legendre-Gauss-Lobatto points on [-1, 1]"""
    interior = Legendre.basis(n - 1).deriv().roots()
    return np.concatenate(([-1.0], np.sort(interior.real), [1.0]))


@lru_cache(maxsize=None)
def lgl_table(order: int) -> LglTable:
    n = nodes_for_order(order)
    tau = lgl_points(n)
    p = Legendre.basis(n - 1)(tau)
    weights = 2.0 / (n * (n - 1) * p ** 2)

    # A[k, j] = ∫_{-1}^{τ_k} ℓ_j / 2, i.e. in fractions of the segment length
    integration = np.zeros((n, n))
    for j in range(n):
        others = np.delete(tau, j)
        basis = Polynomial.fromroots(others) / np.prod(tau[j] - others)
        antiderivative = basis.integ(lbnd=-1.0)
        integration[:, j] = 0.5 * antiderivative(tau)

    return LglTable(order, 0.5 * (tau + 1.0), 0.5 * weights, integration)


def order_for_nodes(n: int) -> int:
    order = 2 * n - 3
    nodes_for_order(order)
    return order


def node_weights(mesh: Mesh) -> NDArray[np.float64]:
    """Quadrature weight of every global mesh node, in time units"""
    table = lgl_table(order_for_nodes(mesh.nodes_per_segment))
    n = table.n
    seg_nodes = np.arange(mesh.segments)[:, None] * (n - 1) + np.arange(n)[None, :]
    weights = np.zeros(mesh.n_nodes)
    np.add.at(weights, seg_nodes, mesh.steps[:, None] * table.weights[None, :])
    return weights
