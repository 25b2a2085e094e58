"""
Tests for the particle swarm boundary search
"""

import math
from types import SimpleNamespace
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent.parent / "src"))

from fp_reach.errors import (
    ConfigurationError,
    DirectionFailedError,
    NlpConvergenceError,
    StageError,
    VerificationError,
)
from fp_reach.linreach import ShadowEllipse, build_energy_matrices, project_ellipsoid
from fp_reach.ocp.solve import SolverReport
from fp_reach.pso import oracles as oracle_module
from fp_reach.pso.oracles import EllipsoidOracle, MassOptimalOracle, Oracle, OracleOutcome, classify_failure
from fp_reach.pso.reach import FITNESS_DELTA_V, evaluate, run_direction, sweep
from fp_reach.pso.swarm import (
    DirectionWeight,
    Particle,
    SearchSpace,
    Swarm,
    SwarmConfig,
    direction_schedule,
    init_swarm,
    update,
)

# Synthetic energy ellipsoid: tight in xy, loose elsewhere, J* = 0.5
SEMI_AXES = np.array([5e-4, 2.5e-4, 1e-2, 1e-2, 1e-2, 1e-2])
E_STAR = np.diag(1.0 / SEMI_AXES ** 2)
ENERGY_LIMIT = 0.5
PERIOD = 2.0


class ConstantOracle(Oracle):
    """Answers every query with the same outcome"""

    def __init__(self, feasible: bool, duty: float = 0.5, failure: str = "other"):
        self.feasible = feasible
        self.duty = duty
        self.failure = failure
        self.calls = 0

    @property
    def name(self) -> str:
        return "constant"

    @property
    def description(self) -> str:
        return "fixed outcome"

    def _evaluate_impl(self, dx0):
        self.calls += 1
        if not self.feasible:
            return OracleOutcome(False, failure=self.failure)
        return OracleOutcome(True, j_mass=self.duty + float(np.abs(dx0).sum()), duty_cycle=self.duty)


class RaisingOracle(Oracle):

    def __init__(self, error: Exception):
        self.error = error

    @property
    def name(self) -> str:
        return "raising"

    @property
    def description(self) -> str:
        return "always raises"

    def _evaluate_impl(self, dx0):
        raise self.error


@pytest.fixture
def surrogate():
    return EllipsoidOracle(E_STAR, ENERGY_LIMIT, PERIOD)


@pytest.fixture
def surrogate_config():
    return SwarmConfig(
        init_sigma=1e-4,
        n_sigmas=(1e-3, 1e-3, 1e-12, 1e-12, 1e-12, 1e-12),
        duty_stop=0.9999,
        sample_duty=0.95,
        update_form="incremental",
        seed=42,
    )


class TestSwarmConfig:

    def test_defaults(self):
        cfg = SwarmConfig()
        assert cfg.beta == 0.7
        assert cfg.alpha(0) == 1.0
        assert cfg.alpha(3) == 0.125
        assert cfg.n_sigmas == (8e-3, 8e-4, 6e-3, 8e-3, 1e-2, 4e-3)
        assert cfg.update_form == "literal"

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"beta": 1.0},
            {"alpha_base": 0.0},
            {"n_particles": 0},
            {"n_sigmas": (1.0, 1.0)},
            {"update_form": "momentum"},
            {"duty_stop": 1.5},
            {"stall_limit": 0},
        ],
    )
    def test_rejects(self, kwargs):
        with pytest.raises(ConfigurationError):
            SwarmConfig(**kwargs)

    def test_direction_schedule(self):
        weights = direction_schedule()
        assert len(weights) == 12
        assert weights[1].psi == pytest.approx(math.pi / 6.0)
        assert np.allclose(weights[3].vector, [0.0, 1.0, 0.0, 0.0, 0.0, 0.0], atol=1e-15)


class TestInitialization:

    def test_centered_on_base(self):
        base = np.array([1e-3, 0, 0, 0, 0, 0])
        swarm = init_swarm(base, SwarmConfig(n_particles=4000), np.random.default_rng(1))
        spread = swarm.positions - base
        assert np.allclose(spread.mean(axis=0), 0.0, atol=1e-4)
        assert np.allclose(spread.std(axis=0), 9e-4, rtol=0.05)
        assert np.array_equal(swarm.g, base)

    def test_zero_sigma(self):
        swarm = init_swarm(np.ones(6), SwarmConfig(n_particles=3), np.random.default_rng(0), sigma=0.0)
        assert np.array_equal(swarm.positions, np.ones((3, 6)))


class TestUpdate:
    """Accelerated PSO update rule"""

    def _swarm(self, positions, g):
        particles = [Particle(p) for p in positions]
        return Swarm(particles, g=np.asarray(g, dtype=float), best=Particle(g))

    def test_literal_full_pull(self):
        g = np.array([1.0, 2.0, 3.0, 4.0, 5.0, 6.0])
        x = np.array([0.5, 0.5, 0.5, 0.5, 0.5, 0.5])
        moved = update(self._swarm([x], g), SwarmConfig(), 1, np.random.default_rng(0), alpha=0.0, beta=1.0, form="literal")
        assert np.array_equal(moved.particles[0].dx0, g - x)

    def test_literal_zero_pull(self):
        g = np.ones(6)
        moved = update(
            self._swarm([np.full(6, 3.0), -np.ones(6)], g), SwarmConfig(), 1, np.random.default_rng(0),
            alpha=0.0, beta=0.0, form="literal",
        )
        assert all(np.array_equal(p.dx0, np.zeros(6)) for p in moved.particles)

    def test_default_form_is_literal(self):
        g = np.array([1.0, 2.0, 3.0, 4.0, 5.0, 6.0])
        x = np.full(6, 0.5)
        pulled = update(self._swarm([x], g), SwarmConfig(), 1, np.random.default_rng(0), alpha=0.0, beta=1.0)
        assert np.array_equal(pulled.particles[0].dx0, g - x)
        frozen = update(self._swarm([x], g), SwarmConfig(), 1, np.random.default_rng(0), alpha=0.0, beta=0.0)
        assert np.array_equal(frozen.particles[0].dx0, np.zeros(6))

    def test_incremental_moves_toward_best(self):
        g = np.ones(6)
        x = np.full(6, 0.5)
        cfg = SwarmConfig(update_form="incremental")
        moved = update(self._swarm([x], g), cfg, 1, np.random.default_rng(0), alpha=0.0)
        assert np.allclose(moved.particles[0].dx0, 0.85 * g)
        assert moved.iteration == 1

    def test_noise_variance_decays_with_iteration(self):
        cfg = SwarmConfig(n_particles=4000)
        g = np.zeros(6)
        swarm = self._swarm(np.zeros((4000, 6)), g)
        for k in (1, 2, 3):
            moved = update(swarm, cfg, k, np.random.default_rng(k))
            expected = (0.5 ** k) * np.asarray(cfg.n_sigmas)
            assert np.allclose(moved.positions.std(axis=0), expected, rtol=0.05)

    def test_deterministic_for_seed(self):
        swarm = self._swarm(np.zeros((5, 6)), np.ones(6))
        a = update(swarm, SwarmConfig(), 2, np.random.default_rng(7))
        b = update(swarm, SwarmConfig(), 2, np.random.default_rng(7))
        assert np.array_equal(a.positions, b.positions)

    def test_unknown_form(self):
        with pytest.raises(ConfigurationError):
            update(self._swarm([np.zeros(6)], np.zeros(6)), SwarmConfig(), 1, np.random.default_rng(0), form="x")


class TestSearchSpace:
    """Confinement and shaped noise"""

    TANGENT = np.array([0.0, 1.0, 0.0, 1.0, 0.0, 0.0]) / math.sqrt(2.0)

    def _quadratic(self):
        # E* = I - t tᵀ with J* = 0.5: unit ball with the tangent removed
        others = np.linalg.svd(np.eye(6) - np.outer(self.TANGENT, self.TANGENT))[0][:, :5]
        return SimpleNamespace(null_space=self.TANGENT.reshape(6, 1), range_factor=others)

    def test_excluding_removes_basis(self):
        space = SearchSpace.excluding(self.TANGENT)
        confined = space.confine(np.arange(6.0))
        assert confined @ self.TANGENT == pytest.approx(0.0, abs=1e-14)
        assert np.allclose(space.confine(confined), confined)

    def test_unconfined_by_default(self):
        d = np.arange(6.0)
        assert SearchSpace().confine(d) is d

    def test_rejects_scale(self):
        with pytest.raises(ConfigurationError):
            SearchSpace(noise_scale=0.0)

    def test_prior_noise_stays_in_range(self):
        space = SearchSpace.linear_prior(self._quadratic(), scale=0.1)
        draws = space.draw(np.random.default_rng(5), (), size=20000)
        assert np.allclose(draws @ self.TANGENT, 0.0, atol=1e-14)
        covariance = np.cov(draws.T)
        expected = 0.01 * (np.eye(6) - np.outer(self.TANGENT, self.TANGENT))
        assert np.allclose(covariance, expected, atol=1e-3)

    def test_componentwise_noise_without_factor(self):
        draws = SearchSpace().draw(np.random.default_rng(2), [1.0, 2.0, 3.0, 4.0, 5.0, 6.0], size=20000)
        assert np.allclose(draws.std(axis=0), [1.0, 2.0, 3.0, 4.0, 5.0, 6.0], rtol=0.05)

    def test_init_with_prior(self):
        space = SearchSpace.linear_prior(self._quadratic(), scale=0.02)
        base = np.array([1.0, 0.5, 0.0, 0.5, 0.0, 0.0])
        swarm = init_swarm(base, SwarmConfig(n_particles=50), np.random.default_rng(0), space=space)
        assert swarm.space is space
        assert np.allclose(swarm.g @ self.TANGENT, 0.0, atol=1e-14)
        assert np.allclose(swarm.positions @ self.TANGENT, 0.0, atol=1e-14)
        spread = np.linalg.norm(swarm.positions - swarm.g, axis=1)
        assert spread.max() < 0.2

    def test_update_keeps_particles_confined(self):
        space = SearchSpace.linear_prior(self._quadratic(), scale=0.02)
        swarm = init_swarm(np.zeros(6), SwarmConfig(n_particles=8), np.random.default_rng(0), space=space)
        swarm.best = Particle(np.array([0.3, 0.0, 0.0, 0.0, 0.0, 0.0]))
        moved = update(swarm, SwarmConfig(), 1, np.random.default_rng(1))
        assert moved.space is space
        assert np.allclose(moved.positions @ self.TANGENT, 0.0, atol=1e-14)


class TestOracles:

    def test_ellipsoid_feasible_inside(self, surrogate):
        dx0 = 0.5 * SEMI_AXES * np.eye(6)[0]
        outcome = surrogate.evaluate(dx0)
        assert outcome.feasible
        assert outcome.duty_cycle == pytest.approx(0.25)
        assert outcome.j_mass == pytest.approx(0.25 * surrogate.u_max * PERIOD)

    def test_ellipsoid_infeasible_outside(self, surrogate):
        outcome = surrogate.evaluate(1.01 * SEMI_AXES * np.eye(6)[1])
        assert not outcome.feasible
        assert outcome.failure == "thrust_bound"

    def test_failures_are_caught(self):
        outcome = RaisingOracle(StageError("mass", NlpConvergenceError("stalled"))).evaluate(np.zeros(6))
        assert not outcome.feasible
        assert outcome.failure == "nlp_nonconvergence"
        assert "stalled" in outcome.message

    def test_unexpected_exception(self):
        outcome = RaisingOracle(RuntimeError("boom")).evaluate(np.zeros(6))
        assert outcome.failure == "other"

    @pytest.mark.parametrize(
        "violation,kind",
        [(1e-3, "thrust_bound"), (0.0, "verification")],
    )
    def test_verification_failure_kinds(self, violation, kind):
        report = SolverReport(converged=False, iterations=1, constraint_violation=1.0, optimality=1.0,
                              thrust_violation=violation)
        error = StageError("verify", VerificationError("rejected", report))
        assert classify_failure(error) == kind

    def test_mass_oracle_reports_duty(self, params, reference_orbit, mocker):
        traj = mocker.Mock(j_mass=0.01)
        traj.duty_cycle.return_value = 0.97
        run = mocker.patch.object(oracle_module, "generate_mass_optimal", return_value=traj)
        outcome = MassOptimalOracle(reference_orbit, params).evaluate(np.zeros(6))
        assert outcome.feasible
        assert outcome.duty_cycle == 0.97
        assert outcome.solution is None
        run.assert_called_once()


class TestRunDirection:

    def test_evaluate_scores_projection(self, surrogate):
        weight = DirectionWeight(0.0)
        p = evaluate(Particle(np.array([1e-4, 5e-5, 0, 0, 0, 0])), weight, surrogate)
        assert p.feasible
        assert p.fitness == pytest.approx(1e-4)

    def test_infeasible_scores_zero(self, surrogate):
        p = evaluate(Particle(2.0 * SEMI_AXES), DirectionWeight(0.0), surrogate)
        assert p.fitness == 0.0 and not p.feasible

    def test_reaches_boundary(self, surrogate, surrogate_config):
        weight = DirectionWeight(math.pi / 3.0)
        result = run_direction(weight, np.zeros(6), surrogate_config, surrogate, np.random.default_rng(3))
        assert result.best.duty_cycle > 0.95
        assert result.stop_reason in ("duty", "stall")
        assert result.iterations == len(result.log)
        fitness = [r.best_fitness for r in result.log]
        assert fitness == sorted(fitness)

    def test_all_infeasible_fails(self):
        cfg = SwarmConfig(n_particles=3, infeasible_limit=4)
        oracle = ConstantOracle(feasible=False)
        with pytest.raises(DirectionFailedError):
            run_direction(DirectionWeight(0.0), np.zeros(6), cfg, oracle, np.random.default_rng(0))
        assert oracle.calls == 12

    def test_fitness_switches_to_delta_v(self):
        cfg = SwarmConfig(n_particles=4, switch_iter=2, stall_limit=5, max_iter=30)
        result = run_direction(DirectionWeight(0.0), np.zeros(6), cfg, ConstantOracle(True, duty=0.5),
                               np.random.default_rng(0))
        modes = [r.mode for r in result.log]
        assert modes[0] == "direction"
        assert FITNESS_DELTA_V in modes


class TestSweep:
    """ψ sweep against the analytic ellipsoid"""

    def test_samples_lie_on_the_shadow(self, surrogate, surrogate_config):
        shadow = ShadowEllipse((0, 1), E_STAR[:2, :2], ENERGY_LIMIT)
        result = sweep(surrogate, surrogate_config, direction_schedule(6))
        assert result.attempted == 6
        assert len(result.samples) == 6
        assert not result.failures
        for sample in result.samples:
            ratio = shadow.radial_ratio(sample.best.dx0[:2])
            assert 0.98 <= ratio <= 1.0 + 1e-9

    def test_deterministic_across_workers(self, surrogate, surrogate_config):
        serial = sweep(surrogate, surrogate_config, direction_schedule(3), workers=1)
        threaded = sweep(surrogate, surrogate_config, direction_schedule(3), workers=4)
        for a, b in zip(serial.samples, threaded.samples):
            assert np.array_equal(a.best.dx0, b.best.dx0)
            assert a.iterations == b.iterations

    def test_low_duty_direction_is_recorded(self):
        cfg = SwarmConfig(n_particles=3, stall_limit=2, max_iter=10)
        result = sweep(ConstantOracle(True, duty=0.5), cfg, direction_schedule(2))
        assert result.samples == []
        assert len(result.failures) == 2
        assert "duty" in result.failures[0].reason


@pytest.fixture(scope="module")
def reference_energy(reference_orbit, params):
    return build_energy_matrices(reference_orbit, params)


class TestReferenceEllipsoid:
    """Default swarm settings against the linear reachable set of the reference orbit"""

    def test_twelve_directions_reach_the_shadow(self, reference_energy):
        weights = direction_schedule(12)
        bases = [reference_energy.extreme_point(w.vector) for w in weights]
        result = sweep(
            EllipsoidOracle.from_energy_quadratic(reference_energy),
            SwarmConfig(seed=2024),
            weights,
            space=SearchSpace.linear_prior(reference_energy),
            bases=bases,
        )
        shadow = project_ellipsoid(reference_energy, (0, 1))
        assert result.attempted == 12
        assert len(result.samples) == 12
        for sample, base in zip(result.samples, bases):
            ratio = shadow.radial_ratio(sample.best.dx0[:2])
            assert 0.98 <= ratio <= 1.0 + 1e-6
            assert sample.best.fitness >= 0.98 * sample.weight.project(base)
            assert sample.best.duty_cycle > 0.95

