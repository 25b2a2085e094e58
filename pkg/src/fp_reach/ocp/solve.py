"""
Energy- and mass-optimal solves, mesh refinement, verification and the
staged generation pipeline
"""

import math
from dataclasses import dataclass, field, replace
from typing import Any, List, Optional

import numpy as np
from loguru import logger
from numpy.typing import ArrayLike, NDArray
from pydantic import BaseModel, ConfigDict, model_validator

from ..dynamics.cr3bp import SystemParams, eom_controlled
from ..errors import (
    ConfigurationError,
    FpReachError,
    MeshRefinementError,
    StageError,
    VerificationError,
)
from ..periodic import ReferenceOrbit
from ..propagation.integrator import PropagatorConfig, integrate, propagate
from ..trajectory import Piecewise, Trajectory
from .ipm import IpmOptions, IpmResult, solve_nlp
from .transcription import OcpSpec, transcribe


class SolverReport(BaseModel):
    """Convergence and verification summary attached to every solved trajectory"""
    model_config = ConfigDict(extra="forbid")

    converged: bool
    iterations: int
    constraint_violation: float
    optimality: float
    feasibility_tol: float = 1e-9
    optimality_tol: float = 1e-8
    restorations: int = 0
    mesh_passes: int = 0
    max_segment_error: Optional[float] = None
    reintegration_error: Optional[float] = None
    periodicity_defect: Optional[float] = None
    thrust_violation: Optional[float] = None
    j_energy_quadrature: Optional[float] = None
    j_mass_quadrature: Optional[float] = None
    message: str = ""

    @model_validator(mode="after")
    def _converged_within_tolerances(self) -> "SolverReport":
        if self.converged and not (
            self.constraint_violation < self.feasibility_tol and self.optimality < self.optimality_tol
        ):
            raise ValueError("a converged report must satisfy the feasibility and optimality tolerances")
        return self

    @classmethod
    def from_ipm(cls, result: IpmResult, options: IpmOptions) -> "SolverReport":
        return cls(
            converged=result.converged,
            iterations=result.iterations,
            constraint_violation=result.violation,
            optimality=result.optimality,
            feasibility_tol=options.feasibility_tol,
            optimality_tol=options.optimality_tol,
            restorations=result.restorations,
            message=result.message,
        )


@dataclass(frozen=True)
class SolverSettings:
    """Knobs of the generation pipeline"""
    energy_knots: int = 50
    mass_knots: int = 100
    collocation_order: int = 3
    mesh_tol: float = 1e-10
    max_mesh_passes: int = 10
    energy_thrust_limit: bool = True
    refine: bool = True
    ipm: IpmOptions = field(default_factory=IpmOptions)
    periodicity_tol: float = 1e-9
    node_deviation_tol: float = 1e-8
    thrust_tol: float = 1e-6
    # tenfold mesh tightenings allowed when only the reintegration drift fails
    verify_refinements: int = 3
    mesh_tol_floor: float = 1e-13


def _solve(
    spec: OcpSpec,
    guess: Trajectory,
    params: SystemParams,
    options: Optional[IpmOptions],
) -> Trajectory:
    options = options or IpmOptions()
    nlp, z0 = transcribe(spec, guess, params, spec.mesh)
    logger.info(
        f"Solving {spec.objective}-optimal problem: {nlp.mesh.segments} segments, "
        f"{nlp.n_variables} variables, thrust bound {'on' if spec.thrust_bounded else 'off'}"
    )
    result = solve_nlp(nlp, z0, options)
    traj = nlp.to_trajectory(result.z)
    traj.feasible = True
    traj.report = SolverReport.from_ipm(result, options)
    traj.history = list(guess.history) + [
        f"{spec.objective}: {result.iterations} iterations, J_E={traj.j_energy:.6e}, J_M={traj.j_mass:.6e}"
    ]
    logger.info(
        f"{spec.objective.capitalize()}-optimal solve converged in {result.iterations} iterations: "
        f"J_E={traj.j_energy:.6e}, J_M={traj.j_mass:.6e}, duty={traj.duty_cycle(spec.u_max):.4f}"
    )
    return traj


def solve_energy_optimal(
    spec: OcpSpec,
    guess: Trajectory,
    params: SystemParams,
    options: Optional[IpmOptions] = None,
) -> Trajectory:
    """KKT point of the energy NLP; J_E reported by LGL quadrature"""
    if spec.objective != "energy":
        raise ConfigurationError(f"solve_energy_optimal needs an energy objective, got {spec.objective!r}")
    return _solve(spec, guess, params, options)


def solve_mass_optimal(
    spec: OcpSpec,
    warm_start: Trajectory,
    params: SystemParams,
    options: Optional[IpmOptions] = None,
) -> Trajectory:
    """KKT point of the mass NLP warm-started from an energy-optimal solution"""
    if spec.objective != "mass":
        raise ConfigurationError(f"solve_mass_optimal needs a mass objective, got {spec.objective!r}")
    return _solve(spec, warm_start, params, options)


def _segment_control(solution: Trajectory, i: int):
    fn = solution.control_fn
    if isinstance(fn, Piecewise):
        return fn.pieces[i]
    return fn


def segment_errors(
    solution: Trajectory,
    params: SystemParams,
    cfg: Optional[PropagatorConfig] = None,
) -> NDArray[np.float64]:
    """
    Per-segment transcription error

    Each segment is reintegrated from its first node under the segment's
    control polynomial and compared with its last node (max-norm).
    """
    if solution.mesh is None:
        raise ConfigurationError("segment errors need a collocation solution with a mesh")
    cfg = replace(cfg or PropagatorConfig.verification(), dense_output=False)
    mesh = solution.mesh
    errors = np.zeros(mesh.segments)
    for i in range(mesh.segments):
        nodes = mesh.segment_slice(i)
        x_a = solution.states[nodes.start]
        x_b = solution.states[nodes.stop - 1]
        t_a, t_b = mesh.boundaries[i], mesh.boundaries[i + 1]
        arc = propagate(x_a, t_a, t_b, params, cfg, _segment_control(solution, i))
        errors[i] = float(np.max(np.abs(arc.xf - x_b)))
    return errors


def _with_report(traj: Trajectory, **updates: Any) -> Trajectory:
    report = traj.report.model_copy(update=updates) if traj.report is not None else None
    return replace(traj, report=report)


def refine_mesh(
    solution: Trajectory,
    spec: OcpSpec,
    params: SystemParams,
    mesh_tol: Optional[float] = None,
    max_passes: int = 10,
    options: Optional[IpmOptions] = None,
    cfg: Optional[PropagatorConfig] = None,
) -> Trajectory:
    """
    Bisect segments whose reintegration error exceeds mesh_tol and re-solve

    A re-solved mesh is accepted only if its max segment error is lower than
    the best so far; otherwise refinement has stagnated.
    """
    tol = spec.mesh_tol if mesh_tol is None else mesh_tol
    best = solution
    errors = segment_errors(best, params, cfg)
    best_error = float(errors.max())
    logger.info(f"Mesh pass 1: {best.mesh.segments} segments, max segment error {best_error:.3e}")
    if best_error < tol:
        return _with_report(best, mesh_passes=1, max_segment_error=best_error)

    for mesh_pass in range(2, max_passes + 1):
        bad = np.flatnonzero(errors > tol)
        mesh = best.mesh.bisect(bad)
        refined_spec = replace(spec, mesh=mesh)
        candidate = _solve(refined_spec, best, params, options)
        candidate_errors = segment_errors(candidate, params, cfg)
        candidate_error = float(candidate_errors.max())
        logger.info(
            f"Mesh pass {mesh_pass}: split {bad.size} segments -> {mesh.segments}, "
            f"max segment error {candidate_error:.3e}"
        )
        if not candidate_error < best_error:
            raise MeshRefinementError(
                f"mesh refinement stagnated at pass {mesh_pass}: error {candidate_error:.3e} "
                f"did not improve on {best_error:.3e}",
                _with_report(best, mesh_passes=mesh_pass, max_segment_error=best_error),
            )
        best, errors, best_error = candidate, candidate_errors, candidate_error
        if best_error < tol:
            return _with_report(best, mesh_passes=mesh_pass, max_segment_error=best_error)

    raise MeshRefinementError(
        f"mesh refinement reached {max_passes} passes with max segment error {best_error:.3e} >= {tol:.1e}",
        _with_report(best, mesh_passes=max_passes, max_segment_error=best_error),
    )


@dataclass
class VerificationResult:
    periodicity_defect: float
    node_deviation: float
    thrust_violation: float
    j_energy: float
    j_mass: float
    final_state: NDArray[np.float64]


def _reintegrate(solution: Trajectory, params: SystemParams, cfg: PropagatorConfig) -> VerificationResult:
    control = solution.control_fn

    def rhs(t: float, y: NDArray[np.float64]) -> NDArray[np.float64]:
        u = np.asarray(control(t), dtype=float)
        norm = float(np.linalg.norm(u))
        return np.concatenate((eom_controlled(y[:6], u, params), (0.5 * norm * norm, norm)))

    breakpoints = solution.mesh.boundaries if solution.mesh is not None else None
    y0 = np.concatenate((solution.x0, np.zeros(2)))
    sol = integrate(rhs, y0, solution.t0, solution.tf, replace(cfg, dense_output=True), breakpoints)
    node_states = sol.dense(solution.times)[:, :6]
    final = sol.final

    if solution.mesh is not None:
        bounds = solution.mesh.boundaries
        samples = np.concatenate(
            [np.linspace(a, b, 9) for a, b in zip(bounds[:-1], bounds[1:])]
        )
    else:
        samples = solution.times
    thrust = np.linalg.norm(np.asarray(control(samples), dtype=float).reshape(-1, 3), axis=1)
    thrust = np.concatenate((thrust, np.linalg.norm(solution.controls, axis=1)))
    return VerificationResult(
        periodicity_defect=float(np.linalg.norm(final[:6] - solution.x0)),
        node_deviation=float(np.max(np.abs(node_states - solution.states))),
        thrust_violation=float(max(0.0, thrust.max() / params.u_max - 1.0)),
        j_energy=float(final[6]),
        j_mass=float(final[7]),
        final_state=final[:6].copy(),
    )


def reintegrate_verify(
    solution: Trajectory,
    params: SystemParams,
    cfg: Optional[PropagatorConfig] = None,
) -> SolverReport:
    """
    Propagate x₀ under the control interpolant at verification tolerances

    Reports the periodicity defect, the max deviation from the collocation
    nodes, the relative thrust-bound violation and the re-quadratured J_E/J_M.
    """
    cfg = cfg or PropagatorConfig.verification()
    check = _reintegrate(solution, params, cfg)
    logger.info(
        f"Reintegration: periodicity {check.periodicity_defect:.3e}, "
        f"node deviation {check.node_deviation:.3e}, "
        f"thrust violation {check.thrust_violation:.3e}, "
        f"J_M {check.j_mass:.6e} (NLP {solution.j_mass:.6e})"
    )
    base = solution.report or SolverReport(
        converged=False, iterations=0, constraint_violation=math.nan, optimality=math.nan
    )
    return base.model_copy(
        update=dict(
            periodicity_defect=check.periodicity_defect,
            reintegration_error=check.node_deviation,
            thrust_violation=check.thrust_violation,
            j_energy_quadrature=check.j_energy,
            j_mass_quadrature=check.j_mass,
        )
    )


def check_verification(report: SolverReport, settings: SolverSettings) -> None:
    """Raise VerificationError if a verified report breaks an acceptance threshold"""
    failures: List[str] = []
    if report.periodicity_defect is None or not report.periodicity_defect < settings.periodicity_tol:
        failures.append(f"periodicity defect {report.periodicity_defect} >= {settings.periodicity_tol}")
    if report.reintegration_error is None or not report.reintegration_error < settings.node_deviation_tol:
        failures.append(f"node deviation {report.reintegration_error} >= {settings.node_deviation_tol}")
    if report.thrust_violation is None or not report.thrust_violation <= settings.thrust_tol:
        failures.append(f"thrust violation {report.thrust_violation} > {settings.thrust_tol}")
    if failures:
        raise VerificationError("reintegration rejected the solution: " + "; ".join(failures), report)


def _drift_only(report: SolverReport, settings: SolverSettings) -> bool:
    return report.thrust_violation is not None and report.thrust_violation <= settings.thrust_tol


def verify_with_refinement(
    solution: Trajectory,
    spec: OcpSpec,
    params: SystemParams,
    settings: SolverSettings,
) -> Trajectory:
    """
    Reintegrate, check, and tighten the mesh while only the drift fails

    A solution whose periodicity defect or node deviation misses its
    threshold, with the thrust bound met, is refined again at a tenfold
    tighter mesh tolerance (the NLP feasibility tolerance follows it), at
    most verify_refinements times and never below mesh_tol_floor. Anything
    else raises VerificationError with the last report.
    """
    tol = settings.mesh_tol
    rounds = 0
    while True:
        report = reintegrate_verify(solution, params)
        solution = replace(solution, report=report)
        try:
            check_verification(report, settings)
            return solution
        except VerificationError as e:
            tol *= 0.1
            if (
                rounds >= settings.verify_refinements
                or not settings.refine
                or not _drift_only(report, settings)
                or tol < settings.mesh_tol_floor * (1.0 - 1e-9)
            ):
                raise
            rounds += 1
            logger.warning(f"{e}; refining to mesh tolerance {tol:.1e}")
            options = replace(settings.ipm, feasibility_tol=min(settings.ipm.feasibility_tol, 0.1 * tol))
            try:
                solution = refine_mesh(solution, spec, params, tol, settings.max_mesh_passes, options)
            except MeshRefinementError as stalled:
                logger.warning(f"Tightened refinement stopped: {stalled}")
                raise e from stalled
            solution.history.append(f"refined to mesh tolerance {tol:.1e}")


def generate_optimal(
    dx0: ArrayLike,
    orbit: ReferenceOrbit,
    params: SystemParams,
    settings: Optional[SolverSettings] = None,
    objective: str = "mass",
    cfg: Optional[PropagatorConfig] = None,
) -> Trajectory:
    """
    Staged generation of a verified forced-periodic trajectory

    reference propagation -> energy-optimal solve -> (mass-optimal solve) ->
    mesh refinement -> reintegration verification. Failures are re-raised as
    StageError naming the stage.
    """
    settings = settings or SolverSettings()
    if objective not in ("energy", "mass"):
        raise ConfigurationError(f"objective must be 'energy' or 'mass', got {objective!r}")
    dx = np.asarray(dx0, dtype=float)
    stage = "reference"
    try:
        guess = orbit.propagate(params, cfg)
        guess.history.append("reference propagation")

        stage = "energy"
        energy_spec = OcpSpec(
            orbit, dx, "energy", params.u_max,
            thrust_constraint_enabled=settings.energy_thrust_limit,
            knots=settings.energy_knots,
            collocation_order=settings.collocation_order,
            mesh_tol=settings.mesh_tol,
        )
        solution = solve_energy_optimal(energy_spec, guess, params, settings.ipm)
        final_spec = energy_spec

        if objective == "mass":
            stage = "mass"
            final_spec = replace(energy_spec, objective="mass", knots=settings.mass_knots)
            solution = solve_mass_optimal(final_spec, solution, params, settings.ipm)

        if settings.refine:
            stage = "refine"
            solution = refine_mesh(
                solution, final_spec, params, settings.mesh_tol, settings.max_mesh_passes, settings.ipm
            )

        stage = "verify"
        # an unbounded energy problem is not held to the thrust bound
        checks = settings if final_spec.thrust_bounded else replace(settings, thrust_tol=math.inf)
        solution = verify_with_refinement(solution, final_spec, params, checks)
    except FpReachError as e:
        logger.error(f"Generation failed in stage '{stage}': {e}")
        raise StageError(stage, e) from e

    solution.history.append("verified")
    return solution


def generate_mass_optimal(
    dx0: ArrayLike,
    orbit: ReferenceOrbit,
    params: SystemParams,
    settings: Optional[SolverSettings] = None,
    cfg: Optional[PropagatorConfig] = None,
) -> Trajectory:
    """Verified mass-optimal forced-periodic trajectory for x₀ = x_ref + δx₀"""
    return generate_optimal(dx0, orbit, params, settings, "mass", cfg)
