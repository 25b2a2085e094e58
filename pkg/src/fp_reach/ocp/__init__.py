"""
Optimal-control package for fp-reach

- lgl.py: LGL nodes, weights and integration matrices
- transcription.py: OcpSpec and the collocation NLP
- ipm.py: primal-dual interior-point solver
- solve.py: energy/mass solves, mesh refinement, verification, pipeline
"""

from .ipm import InteriorPointSolver, IpmOptions, IpmResult, NlpProblem, solve_nlp
from .lgl import LglTable, lgl_table, node_weights, nodes_for_order
from .solve import (
    SolverReport,
    SolverSettings,
    check_verification,
    generate_mass_optimal,
    generate_optimal,
    refine_mesh,
    reintegrate_verify,
    segment_errors,
    solve_energy_optimal,
    solve_mass_optimal,
    verify_with_refinement,
)
from .transcription import CollocationNlp, OcpSpec, collocation_defects, transcribe

__all__ = [
    "CollocationNlp",
    "InteriorPointSolver",
    "IpmOptions",
    "IpmResult",
    "LglTable",
    "NlpProblem",
    "OcpSpec",
    "SolverReport",
    "SolverSettings",
    "check_verification",
    "collocation_defects",
    "generate_mass_optimal",
    "generate_optimal",
    "lgl_table",
    "node_weights",
    "nodes_for_order",
    "refine_mesh",
    "reintegrate_verify",
    "segment_errors",
    "solve_energy_optimal",
    "solve_mass_optimal",
    "solve_nlp",
    "transcribe",
    "verify_with_refinement",
]
