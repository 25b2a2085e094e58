"""
Tests for toolkit file emission and reading
"""

import json
import math
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent.parent / "src"))

from fp_reach.errors import ConfigurationError
from fp_reach.io.files import (
    TRAJECTORY_COLUMNS,
    comparison_document,
    read_comparison,
    read_ellipsoids,
    read_orbit,
    read_sweep,
    read_trajectory,
    read_trajectory_report,
    trajectory_weights,
    write_ellipsoids,
    write_orbit,
    write_sweep,
    write_trajectory,
)
from fp_reach.io.schemas import EllipseRecord, EllipsoidFile, OrbitFile
from fp_reach.linreach import ShadowEllipse
from fp_reach.ocp.transcription import OcpSpec, CollocationNlp
from fp_reach.periodic import ReferenceOrbit
from fp_reach.pso.reach import DirectionResult, SweepFailure, SweepResult
from fp_reach.pso.swarm import DirectionWeight, Particle


def _sweep_result():
    samples = []
    for psi, dx0, duty in ((0.0, [1e-3, 0, 0, 0, 0, 0], 0.97), (math.pi / 2.0, [0, 2e-3, 0, 0, 0, 0], 0.99)):
        best = Particle(np.array(dx0), fitness=max(dx0), feasible=True, evaluated=True, duty_cycle=duty, j_mass=0.02)
        samples.append(DirectionResult(DirectionWeight(psi), best, [], "stall"))
    return SweepResult(samples, [SweepFailure(math.pi, "no feasible particle")], 3)


class TestOrbitFiles:

    def test_round_trip(self, tmp_path, params):
        orbit = ReferenceOrbit(np.array([1.0 / 3.0, 0.1, -0.2, 1e-17, 0.5, 0.0]), 2.0 / 3.0, 1e-13)
        path = write_orbit(orbit, params, tmp_path / "orbit.json")
        back = read_orbit(path)
        assert np.array_equal(back.x0, orbit.x0)
        assert back.period == orbit.period
        assert back.closure_residual == orbit.closure_residual

    def test_rewrite_is_byte_identical(self, tmp_path, params):
        orbit = ReferenceOrbit(np.array([1.0 / 3.0, 0.1, -0.2, 0.0, 0.5, 0.0]), 2.1, 1e-13)
        first = write_orbit(orbit, params, tmp_path / "a.json").read_bytes()
        second = write_orbit(read_orbit(tmp_path / "a.json"), params, tmp_path / "b.json").read_bytes()
        assert first == second
        assert first.endswith(b"\n")

    def test_schema_version_present(self, tmp_path, params):
        path = write_orbit(ReferenceOrbit(np.ones(6), 2.0, 0.0), params, tmp_path / "o.json")
        assert json.loads(path.read_text())["schema_version"] == 1

    def test_invalid_document(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({"state": [1, 2, 3], "period": 2.0, "closure_residual": 0.0, "mu_star": 0.01}))
        with pytest.raises(ConfigurationError, match="state"):
            read_orbit(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigurationError):
            read_orbit(tmp_path / "absent.json")


class TestTrajectoryFiles:

    @pytest.fixture
    def collocation_trajectory(self, reference_orbit, params):
        spec = OcpSpec(reference_orbit, np.zeros(6), "energy", params.u_max, knots=10)
        nlp = CollocationNlp(spec, params)
        x = np.tile(reference_orbit.x0, (nlp.n_nodes, 1))
        u = np.zeros((nlp.n_nodes, 3))
        u[::2, 0] = 1.0
        return nlp.to_trajectory(nlp.pack(x, u))

    def test_csv_reproduces_costs(self, tmp_path, params, collocation_trajectory):
        traj = collocation_trajectory
        report = write_trajectory(traj, np.zeros(6), params, tmp_path / "t.csv", tmp_path / "r.json")
        frame = read_trajectory(tmp_path / "t.csv")
        assert list(frame.columns) == TRAJECTORY_COLUMNS
        norms = np.linalg.norm(frame[["ux", "uy", "uz"]].to_numpy(), axis=1)
        duty = float(frame["w"] @ norms) / (params.u_max * traj.duration)
        assert duty == pytest.approx(report.duty_cycle, rel=1e-14)
        assert np.array_equal(frame["t"].to_numpy(), traj.times)
        assert np.array_equal(frame[["x", "y", "z", "vx", "vy", "vz"]].to_numpy(), traj.states)

    def test_report(self, tmp_path, params, collocation_trajectory):
        traj = collocation_trajectory
        write_trajectory(traj, [1e-4, 0, 0, 0, 0, 0], params, tmp_path / "t.csv", tmp_path / "r.json")
        report = read_trajectory_report(tmp_path / "r.json")
        assert report.objective == "energy"
        assert report.dx0[0] == 1e-4
        assert report.delta_v_mps == pytest.approx(traj.j_mass * params.velocity_unit, rel=1e-15)
        assert report.nodes == traj.times.size
        assert report.mesh_boundaries[0] == 0.0

    def test_trapezoid_weights_without_mesh(self, params, reference_orbit):
        traj = reference_orbit.propagate(params)
        w = trajectory_weights(traj)
        assert w.sum() == pytest.approx(traj.duration, rel=1e-14)

    def test_missing_columns(self, tmp_path):
        (tmp_path / "t.csv").write_text("t,x\n0,1\n")
        with pytest.raises(ConfigurationError, match="missing"):
            read_trajectory(tmp_path / "t.csv")


class TestEllipsoidFiles:

    def test_round_trip_with_failed_phase(self, tmp_path):
        records = [
            EllipseRecord(phase=0, epoch=0.0, state=[1.0] * 6, energy_limit=0.3, plane="xy",
                          shadow=[[2.0, 0.0], [0.0, 3.0]], semi_axes=[0.4, 0.5], condition_number=1e3),
            EllipseRecord(phase=1, epoch=1.0, state=[1.0] * 6, energy_limit=0.3, plane="xy",
                          condition_number=math.inf, error="condition number exceeds cap"),
        ]
        document = EllipsoidFile(u_max=0.018, period=2.0, plane="xy", coords=(0, 1), records=records)
        points = np.array([[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0]])
        write_ellipsoids(document, [(0, 0.0, points)], tmp_path / "e.json", tmp_path / "p.csv")
        back = read_ellipsoids(tmp_path / "e.json")
        assert back == document
        assert "Infinity" in (tmp_path / "e.json").read_text()
        csv = (tmp_path / "p.csv").read_text().splitlines()
        assert csv[0] == "phase,epoch,p1,p2"
        assert len(csv) == 4


class TestSweepFiles:

    def test_sweep_and_comparison(self, tmp_path):
        shadow = ShadowEllipse((0, 1), np.diag([1.0 / 1e-6, 1.0 / 4e-6]), 0.5)
        comparison = write_sweep(_sweep_result(), shadow, tmp_path, "ellipsoid", 5, [0.0, math.pi / 2.0, math.pi])
        document = read_sweep(tmp_path / "sweep.json")
        assert document.seed == 5
        assert document.attempted == 3
        assert [s.psi for s in document.samples] == [0.0, math.pi / 2.0]
        assert document.failures[0].reason == "no feasible particle"
        assert read_comparison(tmp_path / "comparison.json") == comparison

        ratios = [r.radial_ratio for r in comparison.records]
        assert ratios[0] == pytest.approx(1.0, rel=1e-12)
        assert ratios[1] == pytest.approx(1.0, rel=1e-12)
        assert ratios[2] is None
        assert comparison.records[2].r_energy == pytest.approx(1e-3, rel=1e-12)

    def test_boundary_csv(self, tmp_path):
        shadow = ShadowEllipse((0, 1), np.eye(2), 0.5)
        write_sweep(_sweep_result(), shadow, tmp_path, "mass-optimal", 0)
        lines = (tmp_path / "sweep_boundary.csv").read_text().splitlines()
        assert lines[0] == "psi,x,y,z,vx,vy,vz,duty_cycle"
        assert len(lines) == 3

    def test_comparison_uses_polar_angle_of_sample(self):
        shadow = ShadowEllipse((0, 1), np.diag([1.0, 4.0]), 0.5)
        result = _sweep_result()
        # a sample found along ψ = 0 that drifted to the y axis
        result.samples[0].best.dx0 = np.array([0.0, 0.25, 0, 0, 0, 0])
        record = comparison_document(result, shadow, [0.0]).records[0]
        assert record.r_energy == pytest.approx(0.5, rel=1e-12)
        assert record.radial_ratio == pytest.approx(0.5, rel=1e-12)
