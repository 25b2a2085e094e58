"""
Trajectory containers shared by the propagator and the optimal-control solvers
"""

import math
from dataclasses import dataclass, field
from typing import Any, Callable, List, Optional, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import TranscriptionError

TimeFunction = Callable[[Any], NDArray[np.float64]]


class Piecewise:
    """
    Piecewise-defined vector function of time

    Each piece maps an array of m times to an (m, dim) array. Evaluating at
    a scalar returns a (dim,) vector; times outside the span are clamped to
    the first or last piece.
    """

    def __init__(self, boundaries: ArrayLike, pieces: Sequence[TimeFunction], dim: int):
        self.boundaries = np.asarray(boundaries, dtype=float)
        self.pieces = list(pieces)
        self.dim = dim
        if self.boundaries.size != len(self.pieces) + 1:
            raise ValueError("Piecewise needs one more boundary than pieces")

    def __call__(self, t: Any) -> NDArray[np.float64]:
        t_arr = np.atleast_1d(np.asarray(t, dtype=float))
        idx = np.searchsorted(self.boundaries, t_arr, side="right") - 1
        idx = np.clip(idx, 0, len(self.pieces) - 1)
        out = np.empty((t_arr.size, self.dim))
        for k in np.unique(idx):
            mask = idx == k
            out[mask] = np.reshape(self.pieces[k](t_arr[mask]), (int(mask.sum()), self.dim))
        return out[0] if np.ndim(t) == 0 else out


def zero_control(t: Any) -> NDArray[np.float64]:
    """Control history that never thrusts"""
    if np.ndim(t) == 0:
        return np.zeros(3)
    return np.zeros((np.size(t), 3))


@dataclass(frozen=True)
class Mesh:
    """Segment boundaries of a collocation grid and the node layout within segments"""
    boundaries: NDArray[np.float64]
    nodes_per_segment: int

    def __post_init__(self) -> None:
        b = np.asarray(self.boundaries, dtype=float)
        if b.ndim != 1 or b.size < 2 or np.any(np.diff(b) <= 0.0):
            raise TranscriptionError("mesh boundaries must be strictly increasing with at least 2 entries")
        object.__setattr__(self, "boundaries", b)

    @classmethod
    def uniform(cls, t0: float, tf: float, knots: int, nodes_per_segment: int) -> "Mesh":
        return cls(np.linspace(t0, tf, knots), nodes_per_segment)

    @property
    def segments(self) -> int:
        return self.boundaries.size - 1

    @property
    def knots(self) -> int:
        return self.boundaries.size

    @property
    def n_nodes(self) -> int:
        return self.segments * (self.nodes_per_segment - 1) + 1

    @property
    def steps(self) -> NDArray[np.float64]:
        return np.diff(self.boundaries)

    def node_times(self, fractions: NDArray[np.float64]) -> NDArray[np.float64]:
        """Global node times given the nodes' fractional positions in [0, 1]"""
        starts = self.boundaries[:-1, None] + self.steps[:, None] * fractions[None, :-1]
        return np.concatenate((starts.ravel(), self.boundaries[-1:]))

    def segment_slice(self, i: int) -> slice:
        """Global node indices of segment i (endpoints included)"""
        start = i * (self.nodes_per_segment - 1)
        return slice(start, start + self.nodes_per_segment)

    def bisect(self, segments: Sequence[int]) -> "Mesh":
        """Split the listed segments at their midpoints"""
        mids = [0.5 * (self.boundaries[i] + self.boundaries[i + 1]) for i in segments]
        return Mesh(np.unique(np.concatenate((self.boundaries, mids))), self.nodes_per_segment)


@dataclass
class Trajectory:
    """
    Time-ordered nodes of (t, state, control) with dense interpolants

    Produced both by propagation (nodes are integrator steps) and by the
    collocation solvers (nodes are LGL points of a mesh). Costs are in
    canonical units; j_mass is the ΔV in DU/TU.
    """
    times: NDArray[np.float64]
    states: NDArray[np.float64]
    controls: NDArray[np.float64]
    state_fn: TimeFunction
    control_fn: TimeFunction = zero_control
    mesh: Optional[Mesh] = None
    objective: Optional[str] = None
    j_energy: float = math.nan
    j_mass: float = math.nan
    feasible: bool = False
    report: Optional[Any] = None
    history: List[str] = field(default_factory=list)

    def __post_init__(self) -> None:
        self.times = np.asarray(self.times, dtype=float)
        self.states = np.asarray(self.states, dtype=float).reshape(-1, 6)
        self.controls = np.asarray(self.controls, dtype=float).reshape(-1, 3)
        if self.times.size > 1 and np.any(np.diff(self.times) <= 0.0):
            raise TranscriptionError("trajectory node times must be strictly increasing")

    @property
    def t0(self) -> float:
        return float(self.times[0])

    @property
    def tf(self) -> float:
        return float(self.times[-1])

    @property
    def duration(self) -> float:
        return self.tf - self.t0

    @property
    def x0(self) -> NDArray[np.float64]:
        return self.states[0].copy()

    @property
    def xf(self) -> NDArray[np.float64]:
        return self.states[-1].copy()

    def state_at(self, t: Any) -> NDArray[np.float64]:
        return self.state_fn(t)

    def control_at(self, t: Any) -> NDArray[np.float64]:
        return self.control_fn(t)

    def thrust_ratio(self, u_max: float) -> NDArray[np.float64]:
        """‖u‖/u_max at every node"""
        return np.linalg.norm(self.controls, axis=1) / u_max

    def duty_cycle(self, u_max: float) -> float:
        """J_M / (u_max T), the fraction of the period spent at full thrust"""
        if self.duration <= 0.0:
            return 0.0
        return float(self.j_mass / (u_max * self.duration))
