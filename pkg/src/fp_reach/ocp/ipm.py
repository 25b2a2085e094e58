"""
Primal-dual interior-point NLP solver

Solves  min f(z)  s.t.  c(z) = 0,  d(z) <= 0  with slacks σ > 0 on the
inequalities (d(z) + σ = 0) and a log barrier on σ. Each iteration
factorizes the reduced sparse KKT system

    [ W + Jdᵀ Σ Jd + δw I    Jcᵀ  ] [Δz]   [ -r_d - Jdᵀ (ν∘d + μ)/σ ]
    [        Jc            -δc I  ] [Δy] = [          -c            ]

with Σ = ν/σ, regularizing δw until the step passes a curvature test.
Steps are globalized with an ℓ1 merit line search (with a second-order
correction), and the barrier parameter is divided by 5 once the barrier
subproblem is solved to within 10μ. When the line search breaks down an
augmented-Lagrangian loop restores feasibility.
"""

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
import scipy.sparse as sp
from loguru import logger
from numpy.typing import NDArray
from scipy.sparse.linalg import splu

from ..errors import FpReachError, NlpConvergenceError, RestorationError, SingularityError


class NlpProblem(ABC):
    """Smooth NLP with equality constraints c(z) = 0 and inequalities d(z) <= 0"""

    @property
    @abstractmethod
    def n_variables(self) -> int:
        pass

    @property
    @abstractmethod
    def n_equalities(self) -> int:
        pass

    @property
    @abstractmethod
    def n_inequalities(self) -> int:
        pass

    @abstractmethod
    def objective(self, z: NDArray[np.float64]) -> float:
        pass

    @abstractmethod
    def gradient(self, z: NDArray[np.float64]) -> NDArray[np.float64]:
        pass

    @abstractmethod
    def equalities(self, z: NDArray[np.float64]) -> NDArray[np.float64]:
        pass

    @abstractmethod
    def equality_jacobian(self, z: NDArray[np.float64]) -> sp.spmatrix:
        pass

    @abstractmethod
    def inequalities(self, z: NDArray[np.float64]) -> NDArray[np.float64]:
        pass

    @abstractmethod
    def inequality_jacobian(self, z: NDArray[np.float64]) -> sp.spmatrix:
        pass

    @abstractmethod
    def lagrangian_hessian(
        self, z: NDArray[np.float64], y_eq: NDArray[np.float64], y_in: NDArray[np.float64]
    ) -> sp.spmatrix:
        """∇²f + Σ y_eq ∇²c + Σ y_in ∇²d, full symmetric"""
        pass


@dataclass(frozen=True)
class IpmOptions:
    max_iter: int = 500
    feasibility_tol: float = 1e-9
    optimality_tol: float = 1e-8
    mu_init: float = 0.1
    mu_divisor: float = 5.0
    barrier_kappa: float = 10.0
    tau_min: float = 0.99
    armijo: float = 1e-4
    max_backtracks: int = 40
    dual_scale_max: float = 100.0
    slack_floor: float = 1e-2
    restoration_max_outer: int = 15
    restoration_max_inner: int = 30


@dataclass
class IpmResult:
    z: NDArray[np.float64]
    y_eq: NDArray[np.float64]
    y_in: NDArray[np.float64]
    slacks: NDArray[np.float64]
    converged: bool
    iterations: int
    objective: float
    violation: float
    optimality: float
    mu: float
    restorations: int = 0
    message: str = ""
    history: List[Tuple[int, float, float, float, float]] = field(default_factory=list)


@dataclass
class _Eval:
    f: float
    g: NDArray[np.float64]
    c: NDArray[np.float64]
    d: NDArray[np.float64]
    jc: sp.csr_matrix
    jd: sp.csr_matrix


def _max_step(v: NDArray[np.float64], dv: NDArray[np.float64], tau: float) -> float:
    """Largest α in (0, 1] with v + α dv >= (1 - τ) v"""
    neg = dv < 0.0
    if not np.any(neg):
        return 1.0
    return float(min(1.0, tau * np.min(-v[neg] / dv[neg])))


def _inf_norm(v: NDArray[np.float64]) -> float:
    return float(np.max(np.abs(v))) if v.size else 0.0


class InteriorPointSolver:
    """Primal-dual barrier method with sparse LU factorization of the KKT system"""

    def __init__(self, problem: NlpProblem, options: Optional[IpmOptions] = None):
        self.problem = problem
        self.options = options or IpmOptions()
        self._delta_w_last = 0.0
        self.restorations = 0

    # evaluation helpers

    def _evaluate(self, z: NDArray[np.float64]) -> _Eval:
        p = self.problem
        return _Eval(
            f=p.objective(z),
            g=p.gradient(z),
            c=p.equalities(z),
            d=p.inequalities(z),
            jc=sp.csr_matrix(p.equality_jacobian(z)),
            jd=sp.csr_matrix(p.inequality_jacobian(z)),
        )

    @staticmethod
    def violation(c: NDArray[np.float64], d: NDArray[np.float64]) -> float:
        """Max-norm constraint violation"""
        viol = _inf_norm(c)
        if d.size:
            viol = max(viol, float(np.max(np.maximum(d, 0.0))))
        return viol

    def _dual_scale(self, y: NDArray[np.float64], nu: NDArray[np.float64]) -> float:
        m = y.size + nu.size
        if m == 0:
            return 1.0
        s_max = self.options.dual_scale_max
        return max(s_max, (np.abs(y).sum() + np.abs(nu).sum()) / m) / s_max

    def _errors(self, ev: _Eval, sig, y, nu, mu: float) -> Tuple[float, float, float]:
        """(scaled dual infeasibility, primal infeasibility, scaled complementarity)"""
        r_d = ev.g + ev.jc.T @ y + ev.jd.T @ nu
        s_d = self._dual_scale(y, nu)
        cap = self.options.dual_scale_max
        s_c = max(cap, np.abs(nu).sum() / max(nu.size, 1)) / cap
        primal = max(_inf_norm(ev.c), _inf_norm(ev.d + sig))
        compl = _inf_norm(sig * nu - mu) / s_c if nu.size else 0.0
        return _inf_norm(r_d) / s_d, primal, compl

    def _merit(self, z, sig, mu: float, rho: float) -> Tuple[float, float]:
        """(ℓ1 merit value, ℓ1 infeasibility); inf where the problem cannot be evaluated"""
        try:
            f = self.problem.objective(z)
            c = self.problem.equalities(z)
            d = self.problem.inequalities(z)
        except SingularityError:
            return math.inf, math.inf
        theta = float(np.abs(c).sum() + np.abs(d + sig).sum())
        barrier = -mu * float(np.log(sig).sum()) if sig.size else 0.0
        value = f + barrier + rho * theta
        return (value if math.isfinite(value) else math.inf), theta

    # linear algebra

    def _factorize(self, w, ev: _Eval, sigma_diag, delta_w: float, delta_c: float):
        n = self.problem.n_variables
        m = self.problem.n_equalities
        h = w + delta_w * sp.identity(n)
        if sigma_diag.size:
            h = h + ev.jd.T @ sp.diags(sigma_diag) @ ev.jd
        if m == 0:
            return splu(sp.csc_matrix(h)), h
        k = sp.bmat([[h, ev.jc.T], [ev.jc, -delta_c * sp.identity(m)]], format="csc")
        return splu(k), h

    def _kkt_step(self, w, ev: _Eval, sig, nu, rhs_z, rhs_c):
        """Solve the reduced KKT system with inertia-free regularization"""
        n = self.problem.n_variables
        sigma_diag = nu / sig if nu.size else np.zeros(0)
        delta_w = 0.0
        delta_c = 0.0
        rhs = np.concatenate((rhs_z, rhs_c))
        for attempt in range(60):
            try:
                lu, h = self._factorize(w, ev, sigma_diag, delta_w, delta_c)
                sol = lu.solve(rhs)
            except RuntimeError:
                sol = None
            if sol is not None and np.all(np.isfinite(sol)):
                dz = sol[:n]
                curvature = float(dz @ (h @ dz))
                if curvature >= 1e-12 * float(dz @ dz):
                    if delta_w > 0.0:
                        self._delta_w_last = delta_w
                    return dz, sol[n:], lu, h, delta_w
            elif delta_c == 0.0:
                delta_c = 1e-8
            if delta_w == 0.0:
                delta_w = 1e-4 if self._delta_w_last == 0.0 else max(1e-20, self._delta_w_last / 3.0)
            else:
                delta_w *= 8.0 if self._delta_w_last else 100.0
            if delta_w > 1e40:
                break
        raise NlpConvergenceError("KKT system could not be regularized")

    # main loop

    def solve(
        self,
        z0: NDArray[np.float64],
        y0: Optional[NDArray[np.float64]] = None,
        nu0: Optional[NDArray[np.float64]] = None,
    ) -> IpmResult:
        opt = self.options
        p = self.problem
        z = np.asarray(z0, dtype=float).copy()
        if z.size != p.n_variables:
            raise NlpConvergenceError(f"initial point has {z.size} entries, expected {p.n_variables}")
        mu = opt.mu_init
        mu_min = min(opt.feasibility_tol, opt.optimality_tol) / 10.0
        rho = 1.0

        ev = self._evaluate(z)
        sig = np.maximum(-ev.d, opt.slack_floor) if ev.d.size else np.zeros(0)
        y = np.zeros(p.n_equalities) if y0 is None else np.asarray(y0, dtype=float).copy()
        nu = mu / sig if nu0 is None else np.maximum(np.asarray(nu0, dtype=float), 1e-8)
        history: List[Tuple[int, float, float, float, float]] = []

        logger.debug(
            f"IPM start: {p.n_variables} variables, {p.n_equalities} equalities, "
            f"{p.n_inequalities} inequalities"
        )

        for iteration in range(opt.max_iter + 1):
            dual, primal, compl0 = self._errors(ev, sig, y, nu, 0.0)
            viol = self.violation(ev.c, ev.d)
            optimality = max(dual, compl0)
            history.append((iteration, ev.f, viol, optimality, mu))
            if viol < opt.feasibility_tol and optimality < opt.optimality_tol:
                logger.debug(f"IPM converged in {iteration} iterations (f={ev.f:.10e})")
                return IpmResult(z, y, nu, sig, True, iteration, ev.f, viol, optimality, mu,
                                 self.restorations, "converged", history)
            if iteration == opt.max_iter:
                break

            # barrier update
            while mu > mu_min:
                d_mu, p_mu, c_mu = self._errors(ev, sig, y, nu, mu)
                if max(d_mu, p_mu, c_mu) > opt.barrier_kappa * mu:
                    break
                mu = max(mu_min, mu / opt.mu_divisor)
            tau = max(opt.tau_min, 1.0 - mu)

            w = sp.csr_matrix(p.lagrangian_hessian(z, y, nu))
            r_d = ev.g + ev.jc.T @ y + ev.jd.T @ nu
            rhs_z = -r_d
            if nu.size:
                rhs_z = rhs_z - ev.jd.T @ ((nu * ev.d + mu) / sig)
            # second block of the solution is the multiplier increment (r_d already carries Jcᵀy)
            dz, dy, lu, h, delta_w = self._kkt_step(w, ev, sig, nu, rhs_z, -ev.c)
            if nu.size:
                dsig = -(ev.d + sig) - ev.jd @ dz
                dnu = (mu - sig * nu - nu * dsig) / sig
            else:
                dsig = dnu = np.zeros(0)

            alpha_p = _max_step(sig, dsig, tau) if sig.size else 1.0
            alpha_d = _max_step(nu, dnu, tau) if nu.size else 1.0

            # penalty parameter for the ℓ1 merit
            theta0 = float(np.abs(ev.c).sum() + np.abs(ev.d + sig).sum())
            barrier_slope = -mu * float((dsig / sig).sum()) if sig.size else 0.0
            model_slope = float(ev.g @ dz) + barrier_slope
            if theta0 > 0.0:
                curvature = max(float(dz @ (h @ dz)), 0.0)
                rho_needed = (model_slope + 0.5 * curvature) / (0.9 * theta0)
                if rho < rho_needed:
                    rho = rho_needed + 1.0
            phi0, _ = self._merit(z, sig, mu, rho)
            slope = model_slope - rho * theta0

            accepted = self._line_search(
                z, sig, nu, dz, dsig, alpha_p, phi0, slope, theta0, mu, rho, tau, lu, ev
            )
            if accepted is None:
                logger.warning(f"IPM line search failed at iteration {iteration}; entering restoration")
                z, y, nu, sig = self._restore(z, y, nu, mu)
                ev = self._evaluate(z)
                continue

            z, sig, alpha = accepted
            y = y + alpha * dy
            if nu.size:
                nu = nu + alpha_d * dnu
                nu = np.clip(nu, mu / (1e10 * sig), 1e10 * mu / sig)
            ev = self._evaluate(z)
            logger.debug(
                f"IPM {iteration:3d}: f={ev.f:.10e} viol={self.violation(ev.c, ev.d):.2e} "
                f"opt={optimality:.2e} mu={mu:.1e} alpha={alpha:.2e} reg={delta_w:.1e}"
            )

        dual, primal, compl0 = self._errors(ev, sig, y, nu, 0.0)
        result = IpmResult(z, y, nu, sig, False, opt.max_iter, ev.f, self.violation(ev.c, ev.d),
                           max(dual, compl0), mu, self.restorations,
                           f"iteration cap {opt.max_iter} reached", history)
        raise NlpConvergenceError(
            f"interior-point solver did not converge in {opt.max_iter} iterations "
            f"(violation {result.violation:.2e}, optimality {result.optimality:.2e})",
            result,
        )

    def _line_search(self, z, sig, nu, dz, dsig, alpha_max, phi0, slope, theta0, mu, rho, tau, lu, ev):
        opt = self.options
        alpha = alpha_max
        for k in range(opt.max_backtracks):
            z_t = z + alpha * dz
            sig_t = sig + alpha * dsig
            phi_t, theta_t = self._merit(z_t, sig_t, mu, rho)
            if phi_t <= phi0 + opt.armijo * alpha * slope:
                return z_t, sig_t, alpha
            if k == 0 and math.isfinite(theta_t) and theta_t >= theta0:
                corrected = self._second_order_correction(z_t, sig_t, sig, nu, mu, rho, tau, lu, ev)
                if corrected is not None:
                    z_c, sig_c, phi_c = corrected
                    if phi_c <= phi0 + opt.armijo * alpha * slope:
                        return z_c, sig_c, alpha
            alpha *= 0.5
        return None

    def _second_order_correction(self, z_t, sig_t, sig, nu, mu, rho, tau, lu, ev):
        p = self.problem
        n = p.n_variables
        try:
            c_t = p.equalities(z_t)
            r_p = p.inequalities(z_t) + sig_t
        except SingularityError:
            return None
        rhs_z = -(ev.jd.T @ (nu * r_p / sig)) if sig.size else np.zeros(n)
        rhs = np.concatenate((rhs_z, -c_t))
        sol = lu.solve(rhs)
        dz_c = sol[:n]
        if sig.size:
            dsig_c = -r_p - ev.jd @ dz_c
            sig_c = sig_t + dsig_c
            if np.any(sig_c < (1.0 - tau) * sig):
                return None
        else:
            sig_c = sig_t
        z_c = z_t + dz_c
        phi_c, _ = self._merit(z_c, sig_c, mu, rho)
        return z_c, sig_c, phi_c

    def _restore(self, z, y, nu, mu):
        """
        Augmented-Lagrangian feasibility restoration

        Minimizes f + λᵀc + ρ/2 ‖c‖² + 1/(2ρ) ‖max(0, ν + ρ d)‖² with damped
        Newton steps, updating multipliers and ρ until the violation drops
        below a tenth of its entry value (or the feasibility tolerance).
        """
        opt = self.options
        p = self.problem
        self.restorations += 1
        ev = self._evaluate(z)
        entry = self.violation(ev.c, ev.d)
        target = max(0.1 * entry, opt.feasibility_tol)
        lam = y.copy()
        nu_al = nu.copy()
        rho = 10.0
        n = p.n_variables

        def aug_value(zz: NDArray[np.float64]) -> float:
            try:
                c = p.equalities(zz)
                d = p.inequalities(zz)
                f = p.objective(zz)
            except SingularityError:
                return math.inf
            shifted = np.maximum(0.0, nu_al + rho * d)
            return float(f + lam @ c + 0.5 * rho * c @ c + (shifted @ shifted - nu_al @ nu_al) / (2.0 * rho))

        for outer in range(opt.restoration_max_outer):
            for inner in range(opt.restoration_max_inner):
                ev = self._evaluate(z)
                shifted = np.maximum(0.0, nu_al + rho * ev.d)
                y_eff = lam + rho * ev.c
                grad = ev.g + ev.jc.T @ y_eff + ev.jd.T @ shifted
                if _inf_norm(grad) < max(opt.optimality_tol, 1e-3 * target):
                    break
                active = shifted > 0.0
                jd_a = ev.jd[active]
                h = (
                    sp.csr_matrix(p.lagrangian_hessian(z, y_eff, shifted))
                    + rho * (ev.jc.T @ ev.jc)
                    + rho * (jd_a.T @ jd_a)
                )
                step = None
                delta = 0.0
                for _ in range(40):
                    try:
                        lu = splu(sp.csc_matrix(h + delta * sp.identity(n)))
                        cand = lu.solve(-grad)
                        if np.all(np.isfinite(cand)) and float(grad @ cand) < 0.0:
                            step = cand
                            break
                    except RuntimeError:
                        pass
                    delta = 1e-6 if delta == 0.0 else delta * 10.0
                if step is None:
                    step = -grad
                value0 = aug_value(z)
                slope = float(grad @ step)
                alpha = 1.0
                for _ in range(opt.max_backtracks):
                    if aug_value(z + alpha * step) <= value0 + opt.armijo * alpha * slope:
                        break
                    alpha *= 0.5
                else:
                    break
                z = z + alpha * step

            ev = self._evaluate(z)
            viol = self.violation(ev.c, ev.d)
            logger.debug(
                f"Restoration outer {outer}: violation {viol:.3e} "
                f"(target {target:.3e}), rho={rho:.1e}"
            )
            lam = lam + rho * ev.c
            nu_al = np.maximum(0.0, nu_al + rho * ev.d)
            if viol <= target:
                sig = np.maximum(-ev.d, max(mu, 1e-8)) if ev.d.size else np.zeros(0)
                nu_new = np.maximum(nu_al, mu / sig) if sig.size else np.zeros(0)
                logger.info(f"Restoration reduced violation from {entry:.3e} to {viol:.3e}")
                return z, lam, nu_new, sig
            rho *= 10.0

        raise RestorationError(
            f"feasibility restoration failed: violation {self.violation(ev.c, ev.d):.3e} after "
            f"{opt.restoration_max_outer} outer iterations (entry {entry:.3e})"
        )


def solve_nlp(
    problem: NlpProblem,
    z0: NDArray[np.float64],
    options: Optional[IpmOptions] = None,
    y0: Optional[NDArray[np.float64]] = None,
    nu0: Optional[NDArray[np.float64]] = None,
) -> IpmResult:
    """Run the interior-point solver; unexpected numerical failures become NlpConvergenceError"""
    try:
        return InteriorPointSolver(problem, options).solve(z0, y0, nu0)
    except FpReachError:
        raise
    except (ArithmeticError, ValueError, RuntimeError) as e:
        raise NlpConvergenceError(f"interior-point solver failed: {e}") from e
