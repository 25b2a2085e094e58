"""
Tests for the primal-dual interior-point solver on small NLPs
"""

import sys
from pathlib import Path

import numpy as np
import pytest
import scipy.sparse as sp

sys.path.insert(0, str(Path(__file__).parent.parent / "src"))

from fp_reach.errors import NlpConvergenceError
from fp_reach.ocp.ipm import IpmOptions, NlpProblem, solve_nlp


class QuadraticProgram(NlpProblem):
    """min ½‖z - a‖²  s.t.  Σz = 1,  z >= 0"""

    def __init__(self, a):
        self.a = np.asarray(a, dtype=float)

    @property
    def n_variables(self) -> int:
        return self.a.size

    @property
    def n_equalities(self) -> int:
        return 1

    @property
    def n_inequalities(self) -> int:
        return self.a.size

    def objective(self, z):
        return float(0.5 * np.sum((z - self.a) ** 2))

    def gradient(self, z):
        return z - self.a

    def equalities(self, z):
        return np.array([z.sum() - 1.0])

    def equality_jacobian(self, z):
        return sp.csr_matrix(np.ones((1, self.a.size)))

    def inequalities(self, z):
        return -z

    def inequality_jacobian(self, z):
        return -sp.identity(self.a.size, format="csr")

    def lagrangian_hessian(self, z, y_eq, y_in):
        return sp.identity(self.a.size, format="csr")


class HyperplaneProjection(QuadraticProgram):
    """min ½‖z - a‖²  s.t.  Σz = 1 (no inequalities)"""

    @property
    def n_inequalities(self) -> int:
        return 0

    def inequalities(self, z):
        return np.zeros(0)

    def inequality_jacobian(self, z):
        return sp.csr_matrix((0, self.a.size))


class Rosenbrock(NlpProblem):
    """min (1-x)² + 100(y-x²)²  s.t.  x² + y² <= r²"""

    def __init__(self, radius: float):
        self.radius = radius

    @property
    def n_variables(self) -> int:
        return 2

    @property
    def n_equalities(self) -> int:
        return 0

    @property
    def n_inequalities(self) -> int:
        return 1

    def objective(self, z):
        x, y = z
        return float((1.0 - x) ** 2 + 100.0 * (y - x * x) ** 2)

    def gradient(self, z):
        x, y = z
        return np.array([-2.0 * (1.0 - x) - 400.0 * x * (y - x * x), 200.0 * (y - x * x)])

    def equalities(self, z):
        return np.zeros(0)

    def equality_jacobian(self, z):
        return sp.csr_matrix((0, 2))

    def inequalities(self, z):
        return np.array([z @ z - self.radius ** 2])

    def inequality_jacobian(self, z):
        return sp.csr_matrix(2.0 * z[None, :])

    def lagrangian_hessian(self, z, y_eq, y_in):
        x, y = z
        h = np.array([[2.0 - 400.0 * (y - 3.0 * x * x), -400.0 * x], [-400.0 * x, 200.0]])
        return sp.csr_matrix(h + 2.0 * y_in[0] * np.eye(2))


class TestQuadraticProgram:
    """Projection onto the probability simplex"""

    def test_interior_solution(self):
        result = solve_nlp(QuadraticProgram([0.2, 0.3, 0.5]), np.full(3, 1.0 / 3.0))
        assert result.converged
        assert np.allclose(result.z, [0.2, 0.3, 0.5], atol=1e-7)

    def test_active_bounds(self):
        result = solve_nlp(QuadraticProgram([1.0, 0.5, -1.0]), np.full(3, 1.0 / 3.0))
        assert result.converged
        assert np.allclose(result.z, [0.75, 0.25, 0.0], atol=1e-7)
        assert result.violation < 1e-9
        # multiplier of the active bound is positive, inactive ones vanish
        assert result.y_in[2] > 0.1
        assert np.all(result.y_in[:2] < 1e-6)

    def test_history_records_every_iteration(self):
        result = solve_nlp(QuadraticProgram([1.0, 0.5, -1.0]), np.full(3, 1.0 / 3.0))
        assert [h[0] for h in result.history] == list(range(result.iterations + 1))

    def test_wrong_initial_size(self):
        with pytest.raises(NlpConvergenceError):
            solve_nlp(QuadraticProgram([0.2, 0.8]), np.zeros(3))

    def test_active_bounds_multiplier(self):
        # stationarity on the free components: z_i - a_i + y = 0
        result = solve_nlp(QuadraticProgram([1.0, 0.5, -1.0]), np.full(3, 1.0 / 3.0))
        assert result.y_eq[0] == pytest.approx(0.25, abs=1e-7)


class TestEqualityMultipliers:
    """Newton steps on c(z) = 0 move the multiplier by the KKT increment"""

    def test_hyperplane_projection(self):
        a = np.array([0.4, -0.2, 1.3, 0.1])
        result = solve_nlp(HyperplaneProjection(a), np.zeros(4))
        shift = (1.0 - a.sum()) / a.size
        assert result.converged
        assert np.allclose(result.z, a + shift, atol=1e-9)
        assert result.y_eq[0] == pytest.approx(-shift, abs=1e-9)

    def test_converges_in_few_iterations(self):
        # one Newton step solves an equality-constrained QP exactly
        result = solve_nlp(HyperplaneProjection([0.4, -0.2, 1.3, 0.1]), np.zeros(4))
        assert result.iterations <= 3

    def test_warm_multiplier_is_kept(self):
        a = np.array([0.4, -0.2, 1.3, 0.1])
        shift = (1.0 - a.sum()) / a.size
        result = solve_nlp(HyperplaneProjection(a), a + shift, y0=np.array([-shift]))
        assert result.iterations == 0


class TestNonlinear:

    def test_unconstrained_minimum_inside(self):
        result = solve_nlp(Rosenbrock(2.0), np.array([-1.0, 1.0]))
        assert result.converged
        assert np.allclose(result.z, [1.0, 1.0], atol=1e-6)

    def test_constrained_minimum_on_circle(self):
        result = solve_nlp(Rosenbrock(1.0), np.array([0.0, 0.0]))
        assert result.converged
        assert np.linalg.norm(result.z) == pytest.approx(1.0, abs=1e-8)
        assert np.allclose(result.z, [0.7864, 0.6177], atol=1e-3)

    def test_iteration_cap(self):
        with pytest.raises(NlpConvergenceError) as info:
            solve_nlp(Rosenbrock(2.0), np.array([-1.2, 1.0]), IpmOptions(max_iter=2))
        assert info.value.report is not None
        assert not info.value.report.converged
