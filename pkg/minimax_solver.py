"""
Minimax Solver Module

Certified solution of

    Opt_Z(y) = min_{z in Z} || T (y - z_0^{N-1}) ||_inf

for the nuisance sets Zero, Subspace(w) and EpsSet(w, eps), with T either the
normalized Fourier transform F_N (solve) or the identity (solve_uniform).

- Fourier objective: restarted Chambolle-Pock primal-dual iterations; every
  check evaluates a feasible primal point and a repaired dual point, so the
  reported gap is a certificate, not an estimate
- Identity objective: linear program solved with HiGHS; its duals go through
  the same repair
- Fallback when the iteration budget runs out: a cutting-plane linear program
  over polygonal moduli, certified the same way
- Optional decision threshold: stop as soon as the comparison against it is
  certified

Author: Harmonic Detection Toolkit
"""

import logging
import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np
from scipy import sparse as sp_sparse
from scipy.optimize import linprog

from harmonics.errors import DimensionError, DomainError, NotConverged
from harmonics.nuisance import EPS_SET, SUBSPACE, ZERO, NuisanceSpec
from harmonics.spectrum import fourier, fourier_adjoint

logger = logging.getLogger(__name__)

DEFAULT_SOLVER_PARAMS = {
    'tol_abs_per_sqrt_n': 1e-6,  # tol_abs = this * sqrt(N)
    'tol_rel': 1e-6,
    'iterations_per_sample': 50,  # max_iter = max(this * N, min_iterations)
    'min_iterations': 20000,
    'check_every': 16,  # iterations between certificate evaluations
    'restart_decay': 0.5,  # restart once the candidate gap halves
    'step_factor': 0.99,
    'lp_tolerance': 1e-9,
    'polygon_sides': 8,  # half-planes per bin in the first cutting-plane round
    'cut_rounds': 40,
}


def default_tolerances(N):
    """Return (tol_abs, tol_rel, max_iter) for a window of length N."""
    p = DEFAULT_SOLVER_PARAMS
    return (p['tol_abs_per_sqrt_n'] * math.sqrt(N), p['tol_rel'],
            max(p['iterations_per_sample'] * int(N), p['min_iterations']))


@dataclass(frozen=True)
class SolverReport:
    """
    Result of one minimax solve.

    value is the objective at `minimizer`; lower_bound is the dual objective at
    (dual_u, dual_v), which satisfy the dual constraints exactly, so
    lower_bound <= optimum <= value and gap = value - lower_bound.
    """

    value: float
    minimizer: np.ndarray
    gap: float
    iterations: int
    converged: bool
    lower_bound: float
    dual_u: np.ndarray
    dual_v: Optional[np.ndarray] = None
    minimizer_ext: Optional[np.ndarray] = None
    stop_reason: str = "converged"
    transform: str = "fourier"

    def certifies(self, threshold):
        """True when the gap cannot change the comparison of value against threshold."""
        return self.gap < abs(self.value - threshold)

    def to_dict(self):
        return {
            'value': self.value,
            'gap': self.gap,
            'lower_bound': self.lower_bound,
            'iterations': self.iterations,
            'converged': self.converged,
            'stop_reason': self.stop_reason,
            'transform': self.transform,
        }


def _project_l1_ball(u):
    """Euclidean projection of a real or complex vector onto {||u||_1 <= 1}."""
    moduli = np.abs(u)
    if moduli.sum() <= 1.0:
        return u
    ordered = np.sort(moduli)[::-1]
    excess = np.cumsum(ordered) - 1.0
    ranks = np.arange(1, len(ordered) + 1)
    last = np.nonzero(ordered - excess / ranks > 0)[0][-1]
    theta = excess[last] / (last + 1)
    shrunk = np.maximum(moduli - theta, 0.0)
    factor = np.divide(shrunk, moduli, out=np.zeros_like(moduli), where=moduli > 0)
    return u * factor


def _soft_threshold(a, threshold):
    return np.sign(a) * np.maximum(np.abs(a) - threshold, 0.0)


class _Problem:
    """One normalized instance: transform, nuisance geometry and certificates."""

    def __init__(self, y, Z, use_fourier):
        self.y = y
        self.N = len(y)
        self.Z = Z
        self.kind = Z.effective_kind()
        self.use_fourier = use_fourier
        self.eps = Z.eps
        self.d = Z.d_n if self.kind == EPS_SET else 0
        self.b = self.forward_window(y)

        if self.kind == SUBSPACE:
            self.B = Z.basis(self.N)
        if self.kind == EPS_SET:
            self.coeffs = Z.coeffs()
            self.coeff_norm = float(np.sum(np.abs(self.coeffs)))
            self.E = Z.extended_basis(self.N)

    # transform on the window
    def forward_window(self, v):
        return fourier(v) if self.use_fourier else np.asarray(v, dtype=float)

    def adjoint_window(self, u):
        return fourier_adjoint(u).real if self.use_fourier else np.real(u)

    # finite differences on extended windows
    def fd(self, z_ext):
        return np.convolve(z_ext, self.coeffs, mode="valid")

    def fd_adjoint(self, v):
        return np.convolve(v, self.coeffs[::-1], mode="full")

    def window_of(self, x):
        if self.kind == SUBSPACE:
            return self.B @ x
        return x[self.d:]

    def objective(self, z):
        return float(np.max(np.abs(self.forward_window(self.y - z))))

    def initial_primal(self):
        """
        Feasible start: the least-squares fit (Subspace), or for EpsSet the
        better of the kernel fit and the uniform-norm projection onto the set.
        """
        if self.kind == SUBSPACE:
            return self.B.T @ self.y
        coefficients, *_ = np.linalg.lstsq(self.E[self.d:], self.y, rcond=None)
        fitted = self.E @ coefficients
        if not self.use_fourier:
            return fitted
        try:
            projected = _linear_program(_Problem(self.y, self.Z, use_fourier=False), math.inf, 0.0, None)
        except NotConverged as e:
            logger.debug("Uniform projection unavailable as a start point: %s", e)
            return fitted
        return min((fitted, projected.minimizer_ext), key=lambda x: self.repair_primal(x)[0])

    def repair_primal(self, x):
        """Feasible point near x; returns (upper bound, window, extended window or None)."""
        if self.kind == SUBSPACE:
            z = self.B @ x
            return self.objective(z), z, None

        z_ext = np.asarray(x, dtype=float)
        for _ in range(4):
            violation = float(np.max(np.abs(self.fd(z_ext))))
            if violation <= self.eps:
                break
            # only the part outside the kernel contributes to the residual
            kernel_part = self.E @ (self.E.T @ z_ext)
            z_ext = kernel_part + (z_ext - kernel_part) * (self.eps / violation) * (1.0 - 1e-12)
        else:
            z_ext = self.E @ (self.E.T @ z_ext)
        z = z_ext[self.d:]
        return self.objective(z), z, z_ext

    def repair_dual(self, u, v=None):
        """
        Dual feasible point near (u, v) and its objective.

        v is given in unscaled units (dual of |D z| <= eps). Returns
        (lower bound, u', v') with Re T^* u' = B B^T-free part (Subspace) or
        the window part of D^T v' (EpsSet), and ||u'||_1 <= 1.
        """
        if self.kind == SUBSPACE:
            a = self.adjoint_window(u)
            target = a - self.B @ (self.B.T @ a)
        else:
            v = np.array(v, dtype=float)
            v[:self.d] = 0.0
            target = self.fd_adjoint(v)[self.d:]
            a = self.adjoint_window(u)

        if self.use_fourier:
            u_fixed = u + fourier(target - a)
        else:
            u_fixed = np.real(u) + (target - a)
        kappa = 1.0 / max(1.0, float(np.sum(np.abs(u_fixed))))
        u_fixed = kappa * u_fixed

        lower = kappa * float(np.dot(target, self.y))
        if self.kind == EPS_SET:
            v = kappa * v
            lower -= self.eps * float(np.sum(np.abs(v)))
            return lower, u_fixed, v
        return lower, u_fixed, None


def _validate(y, Z, tol_abs, tol_rel):
    y = np.asarray(y, dtype=float)
    if y.ndim != 1:
        raise DimensionError(f"Observation must be a 1-D window, got shape {y.shape}")
    if not np.all(np.isfinite(y)):
        raise DomainError("Observation contains non-finite values")
    if not isinstance(Z, NuisanceSpec):
        raise TypeError(f"Expected a NuisanceSpec, got {type(Z).__name__}")
    Z.check_window(len(y))
    if tol_abs is not None and tol_abs <= 0 or tol_rel is not None and tol_rel <= 0:
        raise DomainError(f"Tolerances must be positive, got tol_abs={tol_abs}, tol_rel={tol_rel}")
    return y


def _direct_report(y, use_fourier, d=0):
    """Zero nuisance (or zero observation): the objective is attained at z = 0."""
    N = len(y)
    transformed = fourier(y) if use_fourier else y
    value = float(np.max(np.abs(transformed)))
    # subgradient at the largest entry is a tight dual point
    u = np.zeros(N, dtype=complex if use_fourier else float)
    if value > 0:
        tau = int(np.argmax(np.abs(transformed)))
        u[tau] = transformed[tau] / abs(transformed[tau])
    return SolverReport(
        value=value, minimizer=np.zeros(N), gap=0.0, iterations=1, converged=True,
        lower_bound=value, dual_u=u,
        dual_v=np.zeros(N) if d else None,
        minimizer_ext=np.zeros(N + d) if d else None,
        stop_reason="direct", transform="fourier" if use_fourier else "identity",
    )


def _scaled(report, scale):
    """Map a report of the normalized problem back to the caller's units."""
    return replace(
        report,
        value=report.value * scale,
        gap=report.gap * scale,
        lower_bound=report.lower_bound * scale,
        minimizer=report.minimizer * scale,
        minimizer_ext=None if report.minimizer_ext is None else report.minimizer_ext * scale,
    )


def _with_eps(Z, scale):
    if Z.kind == EPS_SET:
        return NuisanceSpec(EPS_SET, Z.w, Z.eps / scale)
    return Z


def solve(y, Z, tol_abs=None, tol_rel=None, max_iter=None, decision_threshold=None):
    """
    Certified value of min_{z in Z} ||F_N (y - z)||_inf.

    Args:
        y: Observation window (length N >= 2)
        Z: NuisanceSpec
        tol_abs, tol_rel: Stop once gap <= tol_abs + tol_rel * value
            (defaults 1e-6 * sqrt(N) and 1e-6)
        max_iter: Primal-dual iteration budget (default max(50 N, 20000));
            once spent, a cutting-plane linear program takes over
        decision_threshold: If given, also stop as soon as the gap is smaller
            than the distance between value and this threshold

    Returns:
        SolverReport

    Raises:
        NotConverged: neither method reached convergence or a certified
            decision; the best report is attached
    """
    y = _validate(y, Z, tol_abs, tol_rel)
    N = len(y)
    default_abs, default_rel, default_iter = default_tolerances(N)
    tol_abs = default_abs if tol_abs is None else tol_abs
    tol_rel = default_rel if tol_rel is None else tol_rel
    max_iter = default_iter if max_iter is None else int(max_iter)

    kind = Z.effective_kind()
    scale = float(np.linalg.norm(y)) / math.sqrt(N)
    d_ext = Z.d_n if kind == EPS_SET else 0
    if kind == ZERO or scale == 0.0:
        return _direct_report(y, use_fourier=True, d=d_ext)

    problem = _Problem(y / scale, _with_eps(Z, scale), use_fourier=True)
    threshold = None if decision_threshold is None else decision_threshold / scale
    report = _primal_dual(problem, tol_abs / scale, tol_rel, max_iter, threshold)
    if report.stop_reason == "max_iter":
        logger.info("No certificate after %d iterations (gap %.3e); switching to the cutting-plane program",
                    report.iterations, report.gap * scale)
        try:
            report = _polygonal_program(problem, tol_abs / scale, tol_rel, threshold, report)
        except NotConverged as e:
            logger.warning("Cutting-plane program failed: %s", e)
    report = _scaled(report, scale)

    if report.stop_reason == "max_iter":
        logger.warning("Solver stopped after %d iterations with gap %.3e (value %.6f, %s)",
                       report.iterations, report.gap, report.value, Z.describe())
        raise NotConverged(
            f"No certificate within {max_iter} iterations: gap {report.gap:.3e} at value {report.value:.6g}",
            report=report,
        )
    return report


def _stop_reason(upper, lower, tol_abs, tol_rel, threshold):
    gap = max(upper - lower, 0.0)
    if gap <= tol_abs + tol_rel * upper:
        return "converged"
    if threshold is not None and gap < abs(upper - threshold):
        return "decided"
    return None


def _primal_dual(problem, tol_abs, tol_rel, max_iter, threshold):
    """Restarted Chambolle-Pock iterations on the normalized problem."""
    params = DEFAULT_SOLVER_PARAMS
    has_eps = problem.kind == EPS_SET
    N = problem.N
    eta = params['step_factor'] / (math.sqrt(2.0) if has_eps else 1.0)
    weight = math.sqrt(N)  # primal iterates scale like ||y||_2, duals like ||u||_1 <= 1

    # the eps block is handled with D / ||c||_1 so that ||D|| <= 1
    fd_scale = problem.coeff_norm if has_eps else 1.0
    eps_scaled = problem.eps / fd_scale if has_eps else 0.0

    x = problem.initial_primal()
    u = np.zeros(N, dtype=complex)
    v = np.zeros(N) if has_eps else None

    best = {'upper': math.inf, 'lower': -math.inf, 'z': None, 'z_ext': None, 'u': u, 'v': v}

    def evaluate(xc, uc, vc):
        upper, z, z_ext = problem.repair_primal(xc)
        lower, u_fixed, v_fixed = problem.repair_dual(uc, None if vc is None else vc / fd_scale)
        if upper < best['upper']:
            best.update(upper=upper, z=z, z_ext=z_ext)
        if lower > best['lower']:
            best.update(lower=lower, u=u_fixed, v=v_fixed)
        return upper - lower

    def finished(iteration):
        reason = _stop_reason(best['upper'], best['lower'], tol_abs, tol_rel, threshold)
        if reason is None and iteration >= max_iter:
            return "max_iter"
        return reason

    restart_gap = evaluate(x, u, v)
    anchor = (x.copy(), u.copy(), None if v is None else v.copy())
    x_bar = x.copy()
    sum_x, sum_u = np.zeros_like(x), np.zeros_like(u)
    sum_v = np.zeros_like(v) if has_eps else None
    count = 0
    iteration = 0
    restarts = 0
    reason = finished(iteration)

    while reason is None:
        tau, sigma = eta * weight, eta / weight

        u = _project_l1_ball(u + sigma * (problem.b - fourier(problem.window_of(x_bar))))
        if problem.kind == SUBSPACE:
            step = problem.B.T @ problem.adjoint_window(u)
        else:
            step = np.concatenate([np.zeros(problem.d), problem.adjoint_window(u)])
            v = _soft_threshold(v + sigma * problem.fd(x_bar) / fd_scale, sigma * eps_scaled)
            step = step - problem.fd_adjoint(v) / fd_scale
        x_new = x + tau * step
        x_bar = 2.0 * x_new - x
        x = x_new

        sum_x += x
        sum_u += u
        if has_eps:
            sum_v += v
        count += 1
        iteration += 1

        if iteration % params['check_every'] and iteration < max_iter:
            continue

        avg = (sum_x / count, sum_u / count, sum_v / count if has_eps else None)
        gap_current = evaluate(x, u, v)
        gap_average = evaluate(*avg)
        reason = finished(iteration)
        if reason is not None:
            break

        candidate = (x, u, v) if gap_current <= gap_average else avg
        candidate_gap = min(gap_current, gap_average)
        if candidate_gap <= params['restart_decay'] * restart_gap:
            moved_x = float(np.linalg.norm(candidate[0] - anchor[0]))
            moved_y = float(np.linalg.norm(candidate[1] - anchor[1]))
            if has_eps:
                moved_y = math.hypot(moved_y, float(np.linalg.norm(candidate[2] - anchor[2])))
            if moved_x > 1e-12 and moved_y > 1e-12:
                weight = math.exp(0.5 * math.log(moved_x / moved_y) + 0.5 * math.log(weight))
            x = candidate[0].copy()
            u = candidate[1].copy()
            v = None if candidate[2] is None else candidate[2].copy()
            x_bar = x.copy()
            anchor = (x.copy(), u.copy(), None if v is None else v.copy())
            sum_x[:] = 0.0
            sum_u[:] = 0.0
            if has_eps:
                sum_v[:] = 0.0
            count = 0
            restart_gap = candidate_gap
            restarts += 1
            logger.debug("restart %d at iteration %d: gap %.3e, primal weight %.3g",
                         restarts, iteration, candidate_gap, weight)

    gap = max(best['upper'] - best['lower'], 0.0)
    if reason == "decided":
        logger.debug("Decision against threshold certified at iteration %d (gap %.3e)", iteration, gap)
    return SolverReport(
        value=best['upper'],
        minimizer=best['z'],
        gap=gap,
        iterations=iteration,
        converged=gap <= tol_abs + tol_rel * best['upper'],
        lower_bound=best['lower'],
        dual_u=best['u'],
        dual_v=best['v'],
        minimizer_ext=best['z_ext'],
        stop_reason=reason,
        transform="fourier",
    )


def _polygonal_program(problem, tol_abs, tol_rel, threshold, start):
    """
    Cutting-plane linear program for the Fourier objective.

    Every modulus |(F (y - z))_tau| <= t is relaxed to half-planes
    Re(exp(-i theta) (F (y - z))_tau) <= t, starting from evenly spaced angles;
    each round adds a half-plane at the phase of every bin whose modulus still
    exceeds t. The relaxation multipliers combine into the complex dual point
    u_tau = sum_k lambda_k exp(i theta_k), so both bounds go through the same
    repair as the primal-dual iterates. `start` supplies the bounds to beat.
    """
    params = DEFAULT_SOLVER_PARAMS
    N, sides = problem.N, params['polygon_sides']
    F = fourier(np.eye(N)).T
    Fy = F @ problem.y
    FM = F @ _window_map(problem).toarray()
    n = FM.shape[1]
    stencil_blocks, stencil_rhs = _stencil_rows(problem)
    stencil = sp_sparse.bmat(stencil_blocks, format="csr") if stencil_blocks else None

    bins = np.repeat(np.arange(N), sides)
    angles = np.tile(2.0 * np.pi * np.arange(sides) / sides, N)
    best = {'upper': start.value, 'lower': start.lower_bound, 'z': start.minimizer,
            'z_ext': start.minimizer_ext, 'u': start.dual_u, 'v': start.dual_v}
    reason = None
    rounds = 0

    while reason is None and rounds < params['cut_rounds']:
        rounds += 1
        rotations = np.exp(-1j * angles)
        cuts = np.column_stack([-np.real(rotations[:, None] * FM[bins]), -np.ones(len(bins))])
        A_ub = sp_sparse.csr_matrix(cuts)
        b_ub = -np.real(rotations * Fy[bins])
        if stencil is not None:
            A_ub = sp_sparse.vstack([A_ub, stencil], format="csr")
            b_ub = np.concatenate([b_ub] + stencil_rhs)
        result = _highs(A_ub, b_ub, n, None)

        multipliers = -result.ineqlin.marginals
        u = np.zeros(N, dtype=complex)
        np.add.at(u, bins, multipliers[:len(bins)] * np.exp(1j * angles))
        v = None
        if stencil is not None:
            m = len(bins)
            v = multipliers[m:m + N] - multipliers[m + N:]

        upper, z, z_ext = problem.repair_primal(result.x[:n])
        lower, u_fixed, v_fixed = problem.repair_dual(u, v)
        if upper < best['upper']:
            best.update(upper=upper, z=z, z_ext=z_ext)
        if lower > best['lower']:
            best.update(lower=lower, u=u_fixed, v=v_fixed)
        reason = _stop_reason(best['upper'], best['lower'], tol_abs, tol_rel, threshold)

        residual_bins = Fy - FM @ result.x[:n]
        violated = np.nonzero(np.abs(residual_bins) > result.x[-1])[0]
        if not len(violated):
            break
        bins = np.concatenate([bins, violated])
        angles = np.concatenate([angles, np.angle(residual_bins[violated])])
        logger.debug("cut round %d: gap %.3e, %d new half-planes",
                     rounds, best['upper'] - best['lower'], len(violated))

    gap = max(best['upper'] - best['lower'], 0.0)
    return SolverReport(
        value=best['upper'],
        minimizer=best['z'],
        gap=gap,
        iterations=start.iterations + rounds,
        converged=gap <= tol_abs + tol_rel * best['upper'],
        lower_bound=best['lower'],
        dual_u=best['u'],
        dual_v=best['v'],
        minimizer_ext=best['z_ext'],
        stop_reason="max_iter" if reason is None else ("lp" if reason == "converged" else reason),
        transform="fourier",
    )


def _window_map(problem):
    """Sparse map from the LP variable x to the nuisance window z."""
    N = problem.N
    if problem.kind == SUBSPACE:
        return sp_sparse.csr_matrix(problem.B)
    return sp_sparse.hstack([sp_sparse.csr_matrix((N, problem.d)), sp_sparse.identity(N)], format="csr")


def _stencil_rows(problem):
    """Blocks over [x, t] and right-hand sides for -eps <= D x <= eps (EpsSet only)."""
    if problem.kind != EPS_SET:
        return [], []
    N = problem.N
    D = sp_sparse.diags(list(problem.coeffs), [problem.d - k for k in range(problem.d + 1)],
                        shape=(N, N + problem.d), format="csr")
    empty = sp_sparse.csr_matrix((N, 1))
    return [[D, empty], [-D, empty]], [np.full(N, problem.eps), np.full(N, problem.eps)]


def _highs(A_ub, b_ub, n, max_iter):
    """min t over [x, t] (n + 1 free variables) subject to A_ub [x, t] <= b_ub."""
    cost = np.zeros(n + 1)
    cost[-1] = 1.0
    tolerance = DEFAULT_SOLVER_PARAMS['lp_tolerance']
    options = {'primal_feasibility_tolerance': tolerance, 'dual_feasibility_tolerance': tolerance}
    if max_iter is not None:
        options['maxiter'] = int(max_iter)
    result = linprog(cost, A_ub=A_ub, b_ub=b_ub, bounds=[(None, None)] * (n + 1),
                     method="highs", options=options)
    if result.status != 0 or result.x is None:
        raise NotConverged(f"Linear program failed: {result.message}")
    return result


def solve_uniform(x, Z, tol_abs=None, tol_rel=None, max_iter=None):
    """
    Certified value of min_{z in Z} ||x - z||_inf over the window.

    Solved as a linear program with HiGHS; the returned gap comes from
    repairing the program's duals, so it does not rely on solver tolerances.

    Args:
        x: Window of length N >= 2
        Z: NuisanceSpec
        tol_abs, tol_rel: Convergence test for the certificate
        max_iter: Passed to HiGHS as its iteration limit when given

    Returns:
        SolverReport with transform "identity"
    """
    x = _validate(x, Z, tol_abs, tol_rel)
    N = len(x)
    default_abs, default_rel, _ = default_tolerances(N)
    tol_abs = default_abs if tol_abs is None else tol_abs
    tol_rel = default_rel if tol_rel is None else tol_rel

    kind = Z.effective_kind()
    scale = float(np.max(np.abs(x)))
    d_ext = Z.d_n if kind == EPS_SET else 0
    if kind == ZERO or scale == 0.0:
        return _direct_report(x, use_fourier=False, d=d_ext)

    problem = _Problem(x / scale, _with_eps(Z, scale), use_fourier=False)
    report = _scaled(_linear_program(problem, tol_abs / scale, tol_rel, max_iter), scale)
    if not report.converged:
        logger.warning("Uniform-distance certificate gap %.3e exceeds tolerance", report.gap)
        raise NotConverged(f"Linear program certificate gap {report.gap:.3e} too large", report=report)
    return report


def _linear_program(problem, tol_abs, tol_rel, max_iter):
    """
    min t  s.t.  -t <= y - M x <= t  (and -eps <= D x <= eps for EpsSet).

    Variables are [x, t] with M = B (Subspace) or the window selector (EpsSet).
    """
    N, y = problem.N, problem.y
    M = _window_map(problem)
    n = M.shape[1]
    ones = sp_sparse.csr_matrix(np.ones((N, 1)))

    blocks = [[-M, -ones], [M, -ones]]
    rhs = [-y, y]
    stencil_blocks, stencil_rhs = _stencil_rows(problem)
    blocks += stencil_blocks
    rhs += stencil_rhs

    result = _highs(sp_sparse.bmat(blocks, format="csr"), np.concatenate(rhs), n, max_iter)

    marginals = -result.ineqlin.marginals  # multipliers of <= rows, nonnegative
    u = marginals[:N] - marginals[N:2 * N]
    v = marginals[2 * N:3 * N] - marginals[3 * N:] if problem.kind == EPS_SET else None

    upper, z, z_ext = problem.repair_primal(result.x[:n])
    lower, u_fixed, v_fixed = problem.repair_dual(u, v)
    gap = max(upper - lower, 0.0)
    return SolverReport(
        value=upper, minimizer=z, gap=gap, iterations=int(getattr(result, "nit", 0) or 1),
        converged=gap <= tol_abs + tol_rel * upper, lower_bound=lower,
        dual_u=u_fixed, dual_v=v_fixed, minimizer_ext=z_ext,
        stop_reason="lp", transform="identity",
    )


def certificate_bounds(y, Z, report):
    """
    Recompute (value, lower bound) of a report from its stored points.

    The dual point is checked for feasibility instead of trusted: if it
    violates the dual constraints by more than round-off the lower bound is
    returned as -inf.
    """
    y = np.asarray(y, dtype=float)
    use_fourier = report.transform == "fourier"
    transform = fourier if use_fourier else (lambda v: np.asarray(v, dtype=float))
    value = float(np.max(np.abs(transform(y - report.minimizer))))

    u = report.dual_u
    a = fourier_adjoint(u).real if use_fourier else np.real(u)
    slack = 1e-8 * max(1.0, float(np.max(np.abs(a))))
    if float(np.sum(np.abs(u))) > 1.0 + 1e-9:
        return value, -math.inf

    kind = Z.effective_kind()
    lower = float(np.dot(a, y))
    if kind == SUBSPACE:
        B = Z.basis(len(y))
        if np.max(np.abs(B.T @ a), initial=0.0) > slack:
            return value, -math.inf
    elif kind == EPS_SET:
        v = report.dual_v
        dual_side = np.convolve(v, Z.coeffs()[::-1], mode="full")
        primal_side = np.concatenate([np.zeros(Z.d_n), a])
        if np.max(np.abs(dual_side - primal_side)) > slack:
            return value, -math.inf
        lower -= Z.eps * float(np.sum(np.abs(v)))
    return value, lower
