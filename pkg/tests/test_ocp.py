"""
End-to-end tests of the energy/mass-optimal pipeline

These solve full collocation problems and are marked slow.
"""

import math
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent.parent / "src"))

from fp_reach.dynamics.units import unit_convert
from fp_reach.errors import (
    ConfigurationError,
    MeshRefinementError,
    NlpConvergenceError,
    StageError,
    VerificationError,
)
from fp_reach.linreach import build_energy_matrices, quadratic_cost
from fp_reach.ocp import solve as ocp_solve
from fp_reach.ocp.solve import (
    SolverReport,
    SolverSettings,
    check_verification,
    generate_optimal,
    reintegrate_verify,
    segment_errors,
    verify_with_refinement,
)
from fp_reach.ocp.transcription import OcpSpec

OFFSET_DIRECTION = np.array([2.0, 0.0, 1.0, 0.0, 0.0, 0.0])
BANG_BANG_DIRECTIONS = [
    OFFSET_DIRECTION,
    np.array([1.0, 0.0, 0.0, 0.0, 0.0, 0.0]),
    np.array([0.0, 0.0, 1.0, 0.0, 0.0, 0.0]),
    np.array([0.0, 0.0, 0.0, 1.0, 0.0, 0.0]),
    np.array([0.0, 0.0, 0.0, 0.0, 0.0, 1.0]),
]


def scaled_offset(energy, direction, fraction):
    """Phase-fixed offset along direction costing fraction·J* under the linear model"""
    d = energy.phase_fixed(direction)
    return d * math.sqrt(fraction * energy.energy_limit / quadratic_cost(d, energy))


@pytest.fixture(scope="module")
def energy(params, reference_orbit):
    return build_energy_matrices(reference_orbit, params)


@pytest.fixture(scope="module")
def offset(energy):
    """Offset costing 5% of the energy limit under the linear model"""
    q = quadratic_cost(OFFSET_DIRECTION, energy)
    return OFFSET_DIRECTION * np.sqrt(0.05 * energy.energy_limit / q)


@pytest.fixture(scope="module")
def settings():
    return SolverSettings()


@pytest.fixture(scope="module")
def energy_solution(params, reference_orbit, settings, offset):
    return generate_optimal(offset, reference_orbit, params, replace(settings, energy_thrust_limit=False), "energy")


@pytest.fixture(scope="module")
def mass_solution(params, reference_orbit, settings, offset):
    return generate_optimal(offset, reference_orbit, params, settings, "mass")


@pytest.fixture(scope="module")
def mass_solve(params, reference_orbit, settings, energy):
    """Verified mass-optimal solves keyed by (direction, energy fraction), each run once"""
    solved = {}

    def run(direction, fraction):
        key = (tuple(direction), fraction)
        if key not in solved:
            dx0 = scaled_offset(energy, direction, fraction)
            solved[key] = generate_optimal(dx0, reference_orbit, params, settings, "mass")
        return solved[key]

    return run


@pytest.mark.slow
class TestEnergyOptimal:
    """Energy-optimal forced-periodic solutions"""

    def test_zero_offset_needs_no_control(self, params, reference_orbit, energy, settings):
        traj = generate_optimal(np.zeros(6), reference_orbit, params, settings, "energy")
        assert traj.history[-1] == "verified"
        assert traj.j_energy < 1e-6 * energy.energy_limit
        assert traj.thrust_ratio(params.u_max).max() < 1e-2

    def test_matches_linear_quadratic_cost(self, energy, offset, energy_solution):
        assert energy_solution.j_energy == pytest.approx(quadratic_cost(offset, energy), rel=1e-2)

    def test_verified(self, energy_solution, settings):
        report = energy_solution.report
        assert report.converged
        assert report.periodicity_defect < settings.periodicity_tol
        assert report.reintegration_error < settings.node_deviation_tol
        assert report.j_energy_quadrature == pytest.approx(energy_solution.j_energy, rel=1e-6)
        assert energy_solution.history[-1] == "verified"

    def test_refined_before_verification(self, params, energy_solution, settings):
        assert energy_solution.report.mesh_passes >= 1
        assert energy_solution.report.max_segment_error < settings.mesh_tol
        assert segment_errors(energy_solution, params).max() < settings.mesh_tol

    def test_starts_at_offset_state(self, reference_orbit, offset, energy_solution):
        assert np.allclose(energy_solution.x0, reference_orbit.x0 + offset, atol=1e-9)
        assert np.allclose(energy_solution.xf, energy_solution.x0, atol=1e-9)


@pytest.mark.slow
@pytest.mark.parametrize("direction", [0, 1, 2, 3, 4, 5])
def test_nonlinear_energy_tracks_linear_prediction(params, reference_orbit, energy, direction):
    dx0 = 1e-4 * np.eye(6)[direction]
    settings = SolverSettings(energy_thrust_limit=False)
    traj = generate_optimal(dx0, reference_orbit, params, settings, "energy")
    assert 0.9 <= traj.j_energy / quadratic_cost(dx0, energy) <= 1.1


@pytest.mark.slow
def test_linear_prediction_improves_as_offset_shrinks(params, reference_orbit, energy):
    unit = energy.phase_fixed(OFFSET_DIRECTION)
    unit = unit / np.linalg.norm(unit)
    settings = SolverSettings(energy_thrust_limit=False)
    deviations = []
    for norm in (1e-3, 1e-4, 1e-5):
        dx0 = norm * unit
        traj = generate_optimal(dx0, reference_orbit, params, settings, "energy")
        ratio = traj.j_energy / quadratic_cost(dx0, energy)
        if norm == 1e-4:
            assert 0.9 <= ratio <= 1.1
        deviations.append(abs(ratio - 1.0))
    assert deviations[1] <= deviations[0] + 1e-3
    assert deviations[2] <= deviations[1] + 1e-3
    assert deviations[2] < 0.01


@pytest.mark.slow
class TestMassOptimal:
    """Mass-optimal solutions warm-started from the energy optimum"""

    def test_thrust_bounded(self, params, mass_solution, settings):
        assert np.all(mass_solution.thrust_ratio(params.u_max) <= 1.0 + settings.thrust_tol)
        assert mass_solution.report.thrust_violation <= settings.thrust_tol

    def test_no_worse_than_energy_solution(self, params, mass_solution, energy_solution):
        assert energy_solution.thrust_ratio(params.u_max).max() < 1.0
        assert mass_solution.j_mass <= energy_solution.j_mass * (1.0 + 1e-4)

    def test_duty_cycle_in_unit_interval(self, params, mass_solution):
        assert 0.0 < mass_solution.duty_cycle(params.u_max) <= 1.0 + 1e-9

    def test_mesh_errors_within_tolerance(self, params, mass_solution, settings):
        assert segment_errors(mass_solution, params).max() < settings.mesh_tol
        assert mass_solution.report.max_segment_error < settings.mesh_tol
        assert mass_solution.report.mesh_passes >= 1

    def test_verified(self, mass_solution, settings):
        report = mass_solution.report
        assert report.periodicity_defect < settings.periodicity_tol
        assert report.reintegration_error < settings.node_deviation_tol
        assert mass_solution.history[-1] == "verified"

    def test_bang_bang_profile(self, params, mass_solution):
        ratio = mass_solution.thrust_ratio(params.u_max)
        on_off = (ratio <= 0.02) | (ratio >= 0.98)
        assert on_off.mean() >= 0.95

    def test_cost_orderings(self, mass_solution, energy_solution):
        period = energy_solution.duration
        assert energy_solution.j_mass <= math.sqrt(2.0 * energy_solution.j_energy * period) * (1.0 + 1e-9)
        assert energy_solution.j_energy <= mass_solution.j_energy * (1.0 + 1e-4)

    def test_history_records_stages(self, mass_solution):
        joined = " ".join(mass_solution.history)
        assert "reference propagation" in joined
        assert "energy:" in joined
        assert "mass:" in joined


@pytest.mark.slow
class TestMassOptimalFamily:
    """Mass-optimal solves across directions and offset sizes"""

    @pytest.mark.parametrize("index", range(len(BANG_BANG_DIRECTIONS)))
    def test_bang_bang_in_every_direction(self, params, mass_solve, index):
        traj = mass_solve(BANG_BANG_DIRECTIONS[index], 0.3)
        ratio = traj.thrust_ratio(params.u_max)
        on_off = (ratio <= 0.02) | (ratio >= 0.98)
        assert on_off.mean() >= 0.95

    def test_duty_cycle_grows_with_offset(self, params, mass_solve):
        duties = [mass_solve(OFFSET_DIRECTION, f).duty_cycle(params.u_max) for f in (0.1, 0.3, 0.5)]
        assert duties[0] < duties[1] < duties[2]

    def test_delta_v_near_the_boundary(self, params, mass_solve):
        traj = mass_solve(OFFSET_DIRECTION, 0.5)
        delta_v = unit_convert(traj.j_mass, "DU/TU", "m/s", params)
        assert 5.0 < delta_v < 39.3

    def test_delta_v_bounded_by_energy_fraction(self, params, energy, mass_solve):
        # ½u² <= ½u_max‖u‖ pointwise, and the mass control costs at least the linear J_E
        traj = mass_solve(OFFSET_DIRECTION, 0.5)
        floor = 2.0 * 0.5 * energy.energy_limit / params.u_max
        assert traj.j_mass >= 0.75 * floor


class TestVerificationThresholds:
    """Acceptance checks on a solver report"""

    def _report(self, **kwargs):
        base = dict(
            converged=True,
            iterations=10,
            constraint_violation=1e-12,
            optimality=1e-10,
            periodicity_defect=1e-12,
            reintegration_error=1e-11,
            thrust_violation=0.0,
        )
        base.update(kwargs)
        return SolverReport(**base)

    def test_passes(self):
        check_verification(self._report(), SolverSettings())

    @pytest.mark.parametrize(
        "field,value",
        [
            ("periodicity_defect", 1e-6),
            ("reintegration_error", 1e-5),
            ("thrust_violation", 1e-3),
            ("periodicity_defect", None),
        ],
    )
    def test_rejects(self, field, value):
        with pytest.raises(VerificationError) as info:
            check_verification(self._report(**{field: value}), SolverSettings())
        assert info.value.exit_code == 4
        assert info.value.report is not None

    def test_converged_report_must_meet_tolerances(self):
        with pytest.raises(ValueError):
            self._report(constraint_violation=1e-3)

    def test_reintegration_of_unconverged_trajectory(self, params, reference_orbit):
        report = reintegrate_verify(reference_orbit.propagate(params), params)
        assert not report.converged
        assert report.periodicity_defect < 1e-9
        assert report.j_mass_quadrature == 0.0


class TestVerifyWithRefinement:
    """Mesh tightening when reintegration drifts"""

    DRIFT = dict(periodicity_defect=1.1e-8, reintegration_error=2.4e-8, thrust_violation=0.0)
    CLEAN = dict(periodicity_defect=1e-12, reintegration_error=1e-11, thrust_violation=0.0)

    def _report(self, **fields):
        return SolverReport(converged=False, iterations=0, constraint_violation=0.0, optimality=0.0, **fields)

    @pytest.fixture
    def spec(self, params, reference_orbit):
        return OcpSpec(reference_orbit, np.zeros(6), "energy", params.u_max, knots=10)

    @pytest.fixture
    def solution(self, params, reference_orbit):
        return reference_orbit.propagate(params)

    def test_clean_report_needs_no_refinement(self, params, spec, solution, mocker):
        mocker.patch.object(ocp_solve, "reintegrate_verify", return_value=self._report(**self.CLEAN))
        refine = mocker.patch.object(ocp_solve, "refine_mesh")
        verified = verify_with_refinement(solution, spec, params, SolverSettings())
        assert verified.report.periodicity_defect == 1e-12
        refine.assert_not_called()

    def test_drift_tightens_the_mesh(self, params, reference_orbit, spec, solution, mocker):
        reports = [self._report(**self.DRIFT), self._report(**self.CLEAN)]
        mocker.patch.object(ocp_solve, "reintegrate_verify", side_effect=reports)
        refine = mocker.patch.object(ocp_solve, "refine_mesh", return_value=reference_orbit.propagate(params))
        verified = verify_with_refinement(solution, spec, params, SolverSettings())
        assert verified.report.reintegration_error == 1e-11
        refine.assert_called_once()
        assert refine.call_args.args[3] == pytest.approx(1e-11)
        assert refine.call_args.args[5].feasibility_tol == pytest.approx(1e-12)
        assert verified.history[-1] == "refined to mesh tolerance 1.0e-11"

    def test_thrust_violation_is_not_refined(self, params, spec, solution, mocker):
        report = self._report(**{**self.DRIFT, "thrust_violation": 1e-3})
        mocker.patch.object(ocp_solve, "reintegrate_verify", return_value=report)
        refine = mocker.patch.object(ocp_solve, "refine_mesh")
        with pytest.raises(VerificationError, match="thrust violation"):
            verify_with_refinement(solution, spec, params, SolverSettings())
        refine.assert_not_called()

    def test_rounds_are_capped(self, params, reference_orbit, spec, solution, mocker):
        mocker.patch.object(ocp_solve, "reintegrate_verify", return_value=self._report(**self.DRIFT))
        refine = mocker.patch.object(
            ocp_solve, "refine_mesh", side_effect=lambda *args: reference_orbit.propagate(params)
        )
        with pytest.raises(VerificationError, match="periodicity defect"):
            verify_with_refinement(solution, spec, params, SolverSettings(verify_refinements=2))
        assert refine.call_count == 2
        assert refine.call_args.args[3] == pytest.approx(1e-12)

    def test_tolerance_floor(self, params, reference_orbit, spec, solution, mocker):
        mocker.patch.object(ocp_solve, "reintegrate_verify", return_value=self._report(**self.DRIFT))
        refine = mocker.patch.object(
            ocp_solve, "refine_mesh", side_effect=lambda *args: reference_orbit.propagate(params)
        )
        with pytest.raises(VerificationError):
            verify_with_refinement(solution, spec, params, SolverSettings(mesh_tol_floor=1e-11))
        assert refine.call_count == 1

    def test_refinement_disabled(self, params, spec, solution, mocker):
        mocker.patch.object(ocp_solve, "reintegrate_verify", return_value=self._report(**self.DRIFT))
        refine = mocker.patch.object(ocp_solve, "refine_mesh")
        with pytest.raises(VerificationError):
            verify_with_refinement(solution, spec, params, SolverSettings(refine=False))
        refine.assert_not_called()

    def test_stagnation_keeps_the_verification_error(self, params, spec, solution, mocker):
        mocker.patch.object(ocp_solve, "reintegrate_verify", return_value=self._report(**self.DRIFT))
        mocker.patch.object(ocp_solve, "refine_mesh", side_effect=MeshRefinementError("stagnated"))
        with pytest.raises(VerificationError) as info:
            verify_with_refinement(solution, spec, params, SolverSettings())
        assert isinstance(info.value.__cause__, MeshRefinementError)
        assert info.value.exit_code == 4


class TestStagedFailures:
    """Failures carry the stage name and the cause's exit status"""

    def test_energy_stage(self, params, reference_orbit, mocker):
        mocker.patch.object(ocp_solve, "solve_nlp", side_effect=NlpConvergenceError("no convergence"))
        with pytest.raises(StageError) as info:
            generate_optimal(np.zeros(6), reference_orbit, params, SolverSettings(energy_knots=10), "mass")
        assert info.value.stage == "energy"
        assert info.value.exit_code == 3
        assert isinstance(info.value.cause, NlpConvergenceError)

    def test_verify_stage(self, params, reference_orbit, mocker):
        mocker.patch.object(
            ocp_solve, "check_verification", side_effect=VerificationError("periodicity defect too large")
        )
        settings = SolverSettings(energy_knots=10, refine=False)
        with pytest.raises(StageError) as info:
            generate_optimal(np.zeros(6), reference_orbit, params, settings, "energy")
        assert info.value.stage == "verify"
        assert info.value.exit_code == 4

    def test_unbounded_energy_skips_thrust_check(self, params, reference_orbit, mocker):
        check = mocker.patch.object(ocp_solve, "check_verification")
        settings = SolverSettings(energy_knots=10, refine=False, energy_thrust_limit=False)
        generate_optimal(np.zeros(6), reference_orbit, params, settings, "energy")
        assert check.call_args.args[1].thrust_tol == math.inf
        assert check.call_args.args[1].periodicity_tol == settings.periodicity_tol

    def test_unknown_objective(self, params, reference_orbit):
        with pytest.raises(ConfigurationError):
            generate_optimal(np.zeros(6), reference_orbit, params, SolverSettings(), "time")
