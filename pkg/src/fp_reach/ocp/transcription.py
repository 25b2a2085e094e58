"""
LGL collocation transcription of the forced-periodic problems

Decision variables are, at every global LGL node, the state X (6), the
control scaled by u_max U' (3) and, for the mass objective, the thrust
magnitude slack S' (1). Constraints are the fixed initial state, the
integral-form defects of every segment, periodicity and the thrust bounds.
Objectives are normalized by the period: ½∫‖U'‖²dt / T for energy and
∫S'dt / T (the duty cycle) for mass.
"""

from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np
import scipy.sparse as sp
from numpy.typing import ArrayLike, NDArray

from ..dynamics.cr3bp import SystemParams, eom_batch, hessian_contract_batch, jacobian_batch
from ..errors import ConfigurationError, TranscriptionError
from ..periodic import ReferenceOrbit
from ..trajectory import Mesh, Piecewise, Trajectory
from .ipm import NlpProblem
from .lgl import LglTable, lgl_table, node_weights, nodes_for_order

OBJECTIVES = ("energy", "mass")
MIN_KNOTS = 10


@dataclass(frozen=True)
class OcpSpec:
    """One fixed-period forced-periodic optimal control problem"""
    orbit: ReferenceOrbit
    dx0: NDArray[np.float64]
    objective: str
    u_max: float
    thrust_constraint_enabled: bool = True
    knots: int = 50
    collocation_order: int = 3
    mesh_tol: float = 1e-10
    mesh: Optional[Mesh] = field(default=None, compare=False)

    def __post_init__(self) -> None:
        dx0 = np.asarray(self.dx0, dtype=float)
        if dx0.shape != (6,) or not np.all(np.isfinite(dx0)):
            raise ConfigurationError(f"dx0 must be a finite 6-vector, got {self.dx0}")
        object.__setattr__(self, "dx0", dx0)
        errors = []
        if self.objective not in OBJECTIVES:
            errors.append(f"objective must be one of {OBJECTIVES}, got {self.objective!r}")
        if self.knots < MIN_KNOTS:
            errors.append(f"knots must be at least {MIN_KNOTS}, got {self.knots}")
        if not self.u_max > 0.0:
            errors.append(f"u_max must be positive, got {self.u_max}")
        if not self.mesh_tol > 0.0:
            errors.append(f"mesh_tol must be positive, got {self.mesh_tol}")
        if errors:
            raise ConfigurationError(f"Invalid problem: {', '.join(errors)}")
        nodes_for_order(self.collocation_order)

    @property
    def period(self) -> float:
        return self.orbit.period

    @property
    def x_start(self) -> NDArray[np.float64]:
        return self.orbit.x0 + self.dx0

    @property
    def thrust_bounded(self) -> bool:
        return self.objective == "mass" or self.thrust_constraint_enabled

    def build_mesh(self) -> Mesh:
        if self.mesh is not None:
            return self.mesh
        return Mesh.uniform(0.0, self.period, self.knots, nodes_for_order(self.collocation_order))


def _segment_polynomials(mesh: Mesh, table: LglTable, values: NDArray[np.float64]) -> Piecewise:
    """Per-segment Lagrange interpolants through node values (N, dim)"""
    pieces = []
    for i in range(mesh.segments):
        a, h = mesh.boundaries[i], mesh.steps[i]
        local = values[mesh.segment_slice(i)]

        def piece(t, a=a, h=h, local=local):
            out = table.lagrange_basis((np.asarray(t, dtype=float) - a) / h) @ local
            return out[0] if np.ndim(t) == 0 else out

        pieces.append(piece)
    return Piecewise(mesh.boundaries, pieces, values.shape[1])


def collocation_defects(
    table: LglTable,
    steps: NDArray[np.float64],
    xs: NDArray[np.float64],
    fs: NDArray[np.float64],
) -> NDArray[np.float64]:
    """
    Integral-form defects X_k - X_0 - h Σ_j A[k, j] f_j of every segment

    xs and fs hold node values and derivatives per segment, shape
    (segments, n, d); the result has shape (segments, n - 1, d).
    """
    a = table.integration[1:]
    return xs[:, 1:, :] - xs[:, :1, :] - steps[:, None, None] * np.einsum("kj,sjd->skd", a, fs)


class CollocationNlp(NlpProblem):
    """Sparse NLP of one OcpSpec on one mesh"""

    def __init__(self, spec: OcpSpec, params: SystemParams, mesh: Optional[Mesh] = None):
        self.spec = spec
        self.params = params
        self.mesh = mesh or spec.build_mesh()
        self.table = lgl_table(spec.collocation_order)
        if self.mesh.nodes_per_segment != self.table.n:
            raise TranscriptionError(
                f"mesh has {self.mesh.nodes_per_segment} nodes per segment, order "
                f"{spec.collocation_order} needs {self.table.n}"
            )
        start, end = self.mesh.boundaries[0], self.mesh.boundaries[-1]
        if abs(start) > 1e-12 or abs(end - spec.period) > 1e-9 * spec.period:
            raise TranscriptionError(
                f"mesh spans [{start}, {end}], expected [0, {spec.period}]"
            )
        self.mass = spec.objective == "mass"
        self.block = 10 if self.mass else 9
        self.n_nodes = self.mesh.n_nodes
        self.times = self.mesh.node_times(self.table.fractions)
        n = self.table.n
        self.seg_nodes = np.arange(self.mesh.segments)[:, None] * (n - 1) + np.arange(n)[None, :]
        self.weights = node_weights(self.mesh)
        self._n_defects = self.mesh.segments * (n - 1) * 6

    # layout

    @property
    def n_variables(self) -> int:
        return self.n_nodes * self.block

    @property
    def n_equalities(self) -> int:
        return 12 + self._n_defects

    @property
    def n_inequalities(self) -> int:
        if self.mass:
            return 3 * self.n_nodes
        return self.n_nodes if self.spec.thrust_constraint_enabled else 0

    def _col(self, nodes: NDArray[np.int64], offset: ArrayLike) -> NDArray[np.int64]:
        return nodes * self.block + np.asarray(offset)

    def unpack(
        self, z: NDArray[np.float64]
    ) -> Tuple[NDArray[np.float64], NDArray[np.float64], Optional[NDArray[np.float64]]]:
        blocks = np.asarray(z, dtype=float).reshape(self.n_nodes, self.block)
        return blocks[:, :6], blocks[:, 6:9], (blocks[:, 9] if self.mass else None)

    def pack(
        self,
        states: NDArray[np.float64],
        controls_scaled: NDArray[np.float64],
        slacks: Optional[NDArray[np.float64]] = None,
    ) -> NDArray[np.float64]:
        blocks = np.zeros((self.n_nodes, self.block))
        blocks[:, :6] = states
        blocks[:, 6:9] = controls_scaled
        if self.mass:
            blocks[:, 9] = slacks if slacks is not None else np.linalg.norm(controls_scaled, axis=1)
        return blocks.ravel()

    # objective

    def objective(self, z: NDArray[np.float64]) -> float:
        _, u, s = self.unpack(z)
        if self.mass:
            return float(self.weights @ s) / self.spec.period
        return 0.5 * float(self.weights @ np.einsum("ij,ij->i", u, u)) / self.spec.period

    def gradient(self, z: NDArray[np.float64]) -> NDArray[np.float64]:
        _, u, _ = self.unpack(z)
        g = np.zeros((self.n_nodes, self.block))
        if self.mass:
            g[:, 9] = self.weights / self.spec.period
        else:
            g[:, 6:9] = self.weights[:, None] * u / self.spec.period
        return g.ravel()

    # equalities: initial state, defects, periodicity

    def equalities(self, z: NDArray[np.float64]) -> NDArray[np.float64]:
        x, u, _ = self.unpack(z)
        f = eom_batch(x, self.spec.u_max * u, self.params)
        defects = collocation_defects(self.table, self.mesh.steps, x[self.seg_nodes], f[self.seg_nodes])
        return np.concatenate((x[0] - self.spec.x_start, defects.ravel(), x[-1] - x[0]))

    def equality_jacobian(self, z: NDArray[np.float64]) -> sp.csr_matrix:
        x, _, _ = self.unpack(z)
        n = self.table.n
        segs = self.mesh.segments
        a = self.table.integration[1:]  # (n-1, n)
        h = self.mesh.steps
        jac = jacobian_batch(x, self.params)[self.seg_nodes]  # (S, n, 6, 6)

        # row of defect (s, k, d), k = 1..n-1
        rows_skd = 6 + np.arange(self._n_defects).reshape(segs, n - 1, 6)
        first = np.zeros(6, dtype=np.int64)
        rows, cols, vals = [np.arange(6)], [self._col(first, np.arange(6))], [np.ones(6)]

        node_k = self.seg_nodes[:, 1:]  # (S, n-1)
        node_0 = np.repeat(self.seg_nodes[:, :1], n - 1, axis=1)
        rows.append(rows_skd.ravel())
        cols.append(self._col(node_k[:, :, None], np.arange(6)[None, None, :]).ravel())
        vals.append(np.ones(self._n_defects))
        rows.append(rows_skd.ravel())
        cols.append(self._col(node_0[:, :, None], np.arange(6)[None, None, :]).ravel())
        vals.append(-np.ones(self._n_defects))

        # -h A[k, j] ∂f/∂x at node j
        coef = -h[:, None, None] * a[None, :, :]  # (S, n-1, n)
        block_vals = coef[:, :, :, None, None] * jac[:, None, :, :, :]  # (S, n-1, n, 6, 6)
        r = np.broadcast_to(rows_skd[:, :, None, :, None], block_vals.shape)
        c = np.broadcast_to(
            self._col(self.seg_nodes[:, None, :, None, None], np.arange(6)[None, None, None, None, :]),
            block_vals.shape,
        )
        mask = block_vals != 0.0
        rows.append(r[mask])
        cols.append(c[mask])
        vals.append(block_vals[mask])

        # -h A[k, j] u_max on the velocity rows
        u_vals = np.broadcast_to((coef * self.spec.u_max)[:, :, :, None], (segs, n - 1, n, 3))
        r_u = np.broadcast_to(rows_skd[:, :, None, 3:], u_vals.shape)
        c_u = np.broadcast_to(
            self._col(self.seg_nodes[:, None, :, None], 6 + np.arange(3)[None, None, None, :]), u_vals.shape
        )
        rows.append(r_u.ravel())
        cols.append(c_u.ravel())
        vals.append(u_vals.ravel())

        # periodicity x_N - x_0
        last = 6 + self._n_defects
        rows += [last + np.arange(6), last + np.arange(6)]
        cols += [
            self._col(np.full(6, self.n_nodes - 1), np.arange(6)),
            self._col(np.zeros(6, dtype=np.int64), np.arange(6)),
        ]
        vals += [np.ones(6), -np.ones(6)]

        return sp.coo_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(self.n_equalities, self.n_variables),
        ).tocsr()

    # inequalities: thrust bounds

    def inequalities(self, z: NDArray[np.float64]) -> NDArray[np.float64]:
        _, u, s = self.unpack(z)
        u2 = np.einsum("ij,ij->i", u, u)
        if self.mass:
            return np.concatenate((u2 - s * s, s - 1.0, -s))
        if self.spec.thrust_constraint_enabled:
            return u2 - 1.0
        return np.zeros(0)

    def inequality_jacobian(self, z: NDArray[np.float64]) -> sp.csr_matrix:
        _, u, s = self.unpack(z)
        nodes = np.arange(self.n_nodes)
        if self.n_inequalities == 0:
            return sp.csr_matrix((0, self.n_variables))
        rows = [np.repeat(nodes, 3)]
        cols = [self._col(nodes[:, None], 6 + np.arange(3)[None, :]).ravel()]
        vals = [(2.0 * u).ravel()]
        if self.mass:
            n = self.n_nodes
            rows += [nodes, n + nodes, 2 * n + nodes]
            cols += [self._col(nodes, 9)] * 3
            vals += [-2.0 * s, np.ones(n), -np.ones(n)]
        return sp.coo_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(self.n_inequalities, self.n_variables),
        ).tocsr()

    # Lagrangian Hessian: block diagonal per node

    def lagrangian_hessian(
        self, z: NDArray[np.float64], y_eq: NDArray[np.float64], y_in: NDArray[np.float64]
    ) -> sp.csr_matrix:
        x, _, _ = self.unpack(z)
        n = self.table.n
        y_def = np.asarray(y_eq)[6:6 + self._n_defects].reshape(self.mesh.segments, n - 1, 6)
        w_seg = -self.mesh.steps[:, None, None] * np.einsum("kj,skd->sjd", self.table.integration[1:], y_def)
        w_node = np.zeros((self.n_nodes, 6))
        np.add.at(w_node, self.seg_nodes, w_seg)
        hxx = hessian_contract_batch(x, w_node, self.params)[:, :3, :3]

        nodes = np.arange(self.n_nodes)
        pos = np.arange(3)
        rows = [np.broadcast_to(self._col(nodes[:, None, None], pos[None, :, None]), hxx.shape).ravel()]
        cols = [np.broadcast_to(self._col(nodes[:, None, None], pos[None, None, :]), hxx.shape).ravel()]
        vals = [hxx.ravel()]

        u_diag = np.zeros(self.n_nodes)
        if not self.mass:
            u_diag += self.weights / self.spec.period
        if self.n_inequalities:
            u_diag += 2.0 * np.asarray(y_in)[: self.n_nodes]
        u_cols = self._col(nodes[:, None], 6 + pos[None, :]).ravel()
        rows.append(u_cols)
        cols.append(u_cols)
        vals.append(np.repeat(u_diag, 3))
        if self.mass:
            s_cols = self._col(nodes, 9)
            rows.append(s_cols)
            cols.append(s_cols)
            vals.append(-2.0 * np.asarray(y_in)[: self.n_nodes])

        return sp.coo_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(self.n_variables, self.n_variables),
        ).tocsr()

    # guesses and solutions

    def initial_point(self, guess: Trajectory) -> NDArray[np.float64]:
        """Decision vector sampled from a guess covering [0, T]"""
        tol = 1e-9 * self.spec.period
        if guess.t0 > tol or guess.tf < self.spec.period - tol:
            raise TranscriptionError(
                f"guess spans [{guess.t0}, {guess.tf}] but the problem needs [0, {self.spec.period}]"
            )
        times = np.clip(self.times, guess.t0, guess.tf)
        states = np.asarray(guess.state_at(times), dtype=float).reshape(self.n_nodes, 6)
        controls = np.asarray(guess.control_at(times), dtype=float).reshape(self.n_nodes, 3) / self.spec.u_max
        if not (np.all(np.isfinite(states)) and np.all(np.isfinite(controls))):
            raise TranscriptionError("guess evaluates to non-finite values on the mesh")
        slacks = None
        if self.mass:
            slacks = np.clip(np.linalg.norm(controls, axis=1) + 0.01, 0.01, 1.0)
        return self.pack(states, controls, slacks)

    def node_defect_norms(self, z: NDArray[np.float64]) -> NDArray[np.float64]:
        """Max-norm of the defects of each segment"""
        n = self.table.n
        defects = self.equalities(z)[6:6 + self._n_defects].reshape(self.mesh.segments, (n - 1) * 6)
        return np.max(np.abs(defects), axis=1)

    def to_trajectory(self, z: NDArray[np.float64]) -> Trajectory:
        x, u, _ = self.unpack(z)
        controls = self.spec.u_max * u
        norms = np.linalg.norm(controls, axis=1)
        return Trajectory(
            times=self.times.copy(),
            states=x.copy(),
            controls=controls,
            state_fn=_segment_polynomials(self.mesh, self.table, x.copy()),
            control_fn=_segment_polynomials(self.mesh, self.table, controls),
            mesh=self.mesh,
            objective=self.spec.objective,
            j_energy=0.5 * float(self.weights @ (norms ** 2)),
            j_mass=float(self.weights @ norms),
        )


def transcribe(
    spec: OcpSpec,
    guess: Trajectory,
    params: SystemParams,
    mesh: Optional[Mesh] = None,
) -> Tuple[CollocationNlp, NDArray[np.float64]]:
    """NLP instance and initial decision vector for a problem and a guess"""
    nlp = CollocationNlp(spec, params, mesh)
    return nlp, nlp.initial_point(guess)
