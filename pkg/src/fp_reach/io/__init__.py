"""
File emission for fp-reach

- schemas.py: pydantic models of the JSON documents
- files.py: writers and readers for orbits, trajectories, ellipsoids, sweeps
"""

from .files import (
    BOUNDARY_COLUMNS,
    POLYLINE_COLUMNS,
    TRAJECTORY_COLUMNS,
    comparison_document,
    read_comparison,
    read_csv,
    read_ellipsoids,
    read_json,
    read_orbit,
    read_sweep,
    read_trajectory,
    read_trajectory_report,
    trajectory_report,
    trajectory_weights,
    write_csv,
    write_ellipsoids,
    write_json,
    write_orbit,
    write_sweep,
    write_trajectory,
)
from .schemas import (
    ComparisonFile,
    ComparisonRecord,
    EllipseRecord,
    EllipsoidFile,
    OrbitFile,
    SweepFile,
    SweepSample,
    TrajectoryReport,
)

__all__ = [
    "BOUNDARY_COLUMNS",
    "POLYLINE_COLUMNS",
    "TRAJECTORY_COLUMNS",
    "ComparisonFile",
    "ComparisonRecord",
    "EllipseRecord",
    "EllipsoidFile",
    "OrbitFile",
    "SweepFile",
    "SweepSample",
    "TrajectoryReport",
    "comparison_document",
    "read_comparison",
    "read_csv",
    "read_ellipsoids",
    "read_json",
    "read_orbit",
    "read_sweep",
    "read_trajectory",
    "read_trajectory_report",
    "trajectory_report",
    "trajectory_weights",
    "write_csv",
    "write_ellipsoids",
    "write_json",
    "write_orbit",
    "write_sweep",
    "write_trajectory",
]
