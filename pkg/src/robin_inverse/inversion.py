"""Tikhonov functional over the admissible box and its projected-gradient minimizer."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .forward import (NumericalError, Observation, ProblemSpec, SpaceTimeField,
                      StepSolver, check_admissible, solve_forward, window_norm)
from .sensitivity import gradient_J, solve_adjoint

log = logging.getLogger(__name__)

ALPHA_FLOOR = 1e-10


class LineSearchError(NumericalError):
    pass


class TikhonovValue(NamedTuple):
    total: float
    misfit: float
    penalty: float


@dataclass
class TikhonovConfig:
    alpha: float
    gamma_star: np.ndarray
    gamma_init: np.ndarray | None = None
    max_iters: int = 500
    grad_tol: float = 1e-9
    c1: float = 1e-4
    backtrack: float = 0.5
    step0: float = 1.0
    max_backtracks: int = 50
    bb_steps: bool = True
    noise_floor: float = 1e-13
    stall_tol: float = 1e-4

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        self.gamma_star = np.asarray(self.gamma_star, dtype=float)


@dataclass
class InversionResult:
    gamma_hat: np.ndarray
    J_history: list[float]
    iterations: int
    final_misfit: float
    final_penalty: float
    l2_error_vs_truth: float | None = None
    stop_reason: str = ""
    delta: float = 0.0
    alpha: float = 0.0

    @property
    def J_final(self) -> float:
        return self.J_history[-1]

    CSV_HEADER = "delta,alpha,iters,J_final,misfit,penalty,l2_error"

    def csv_row(self) -> str:
        err = "" if self.l2_error_vs_truth is None else repr(float(self.l2_error_vs_truth))
        nums = (self.delta, self.alpha)
        tail = (self.J_final, self.final_misfit, self.final_penalty)
        return ",".join([*(repr(float(v)) for v in nums), str(self.iterations),
                         *(repr(float(v)) for v in tail), err])


def choose_alpha(delta: float, c_alpha: float = 1.0, alpha_floor: float = ALPHA_FLOOR) -> float:
    """A-priori rule ``alpha = c_alpha * delta``; exact data fall back to ``alpha_floor``."""
    if delta < 0 or not c_alpha > 0:
        raise ValueError(f"need delta >= 0 and c_alpha > 0, got {delta}, {c_alpha}")
    if delta == 0:
        return alpha_floor
    return c_alpha * delta


def project_admissible(gamma: np.ndarray, lower: float, upper: float) -> np.ndarray:
    return np.clip(np.asarray(gamma, dtype=float), lower, upper)


@dataclass
class _Point:
    gamma: np.ndarray
    value: TikhonovValue
    u: SpaceTimeField
    solver: StepSolver
    grad: np.ndarray | None = field(default=None, repr=False)


class TikhonovProblem:
    """Evaluates the functional and its gradient, sharing step factorizations."""

    def __init__(self, spec: ProblemSpec, observation: Observation, alpha: float,
                 gamma_star: np.ndarray):
        self.spec = spec
        self.observation = observation
        self.alpha = float(alpha)
        self.gamma_star = np.asarray(gamma_star, dtype=float)

    def point(self, gamma: np.ndarray) -> _Point:
        spec = self.spec
        solver = StepSolver(spec, gamma)
        u = solve_forward(spec, gamma, solver)
        value = self.value_of(gamma, u)
        return _Point(solver.gamma, value, u, solver)

    def value_of(self, gamma: np.ndarray, u: SpaceTimeField) -> TikhonovValue:
        spec = self.spec
        resid = u.values[spec.timegrid.window_start:] - self.observation.values
        misfit = window_norm(spec.grid, spec.timegrid, resid) ** 2
        penalty = self.alpha * spec.grid.norm_boundary(gamma - self.gamma_star) ** 2
        return TikhonovValue(misfit + penalty, misfit, penalty)

    def gradient(self, pt: _Point) -> np.ndarray:
        if pt.grad is None:
            adj = solve_adjoint(self.spec, pt.gamma, pt.u, self.observation, pt.solver)
            pt.grad = gradient_J(self.spec, pt.gamma, pt.u, adj.p, self.alpha, self.gamma_star)
        return pt.grad


def evaluate_J(spec: ProblemSpec, gamma: np.ndarray, observation: Observation,
               alpha: float, gamma_star: np.ndarray, parts: bool = False):
    """Window misfit plus ``alpha * ||gamma - gamma_star||^2`` on the boundary.

    Returns the total, or ``(total, misfit, penalty)`` when ``parts`` is set.
    """
    check_admissible(gamma, spec.gamma_lower, spec.gamma_upper, len(spec.grid.boundary))
    value = TikhonovProblem(spec, observation, alpha, gamma_star).point(gamma).value
    return value if parts else value.total


def minimize(spec: ProblemSpec, observation: Observation, config: TikhonovConfig,
             gamma_truth: np.ndarray | None = None) -> InversionResult:
    """Projected gradient descent with Armijo backtracking on the admissible box.

    Trial steps are Barzilai-Borwein lengths (``step0`` on the first
    iteration), always followed by the monotone Armijo test
    ``J_new <= J - c1 * s * ||P(gamma - s g) - gamma||^2 / s^2``.
    """
    grid = spec.grid
    lo, hi = spec.gamma_lower, spec.gamma_upper
    norm = grid.norm_boundary
    problem = TikhonovProblem(spec, observation, config.alpha, config.gamma_star)

    gamma0 = config.gamma_init
    if gamma0 is None:
        gamma0 = project_admissible(config.gamma_star, lo, hi)
    gamma0 = check_admissible(gamma0, lo, hi, len(grid.boundary))

    cur = problem.point(gamma0)
    grad = problem.gradient(cur)
    history = [cur.value.total]
    pg0 = norm(cur.gamma - project_admissible(cur.gamma - grad, lo, hi))
    stop = "max_iters"
    step = config.step0
    iters = 0
    prev_gamma = prev_grad = None

    while True:
        pg = norm(cur.gamma - project_admissible(cur.gamma - grad, lo, hi))
        if pg == 0.0 or pg <= config.grad_tol * pg0:
            stop = "grad_tol"
            break
        if iters >= config.max_iters:
            break

        if config.bb_steps and prev_gamma is not None:
            sg = cur.gamma - prev_gamma
            yg = grad - prev_grad
            curv = grid.inner_boundary(sg, yg)
            step = grid.inner_boundary(sg, sg) / curv if curv > 0 else config.step0
            step = min(max(step, 1e-12), 1e12)

        J = cur.value.total
        # decreases below this are indistinguishable from solver round-off in J
        floor = config.noise_floor * abs(J)
        stalled = False
        for _ in range(config.max_backtracks + 1):
            cand_gamma = project_admissible(cur.gamma - step * grad, lo, hi)
            d = cand_gamma - cur.gamma
            model_decrease = grid.inner_boundary(d, d) / step
            if model_decrease <= floor:
                stalled = True
                break
            cand = problem.point(cand_gamma)
            if cand.value.total <= J - config.c1 * model_decrease:
                break
            step *= config.backtrack
        else:
            raise LineSearchError(
                f"Armijo line search failed after {config.max_backtracks} backtracks "
                f"at iteration {iters} (J={J:.6e}, projected gradient {pg:.3e})")
        if stalled:
            if pg > config.stall_tol * pg0:
                raise LineSearchError(
                    f"line search stalled far from stationarity at iteration {iters} "
                    f"(projected gradient {pg:.3e}, initial {pg0:.3e})")
            stop = "stalled"
            break

        assert np.all((cand.gamma >= lo) & (cand.gamma <= hi))
        prev_gamma, prev_grad = cur.gamma, grad
        cur = cand
        grad = problem.gradient(cur)
        history.append(cur.value.total)
        iters += 1
        log.debug("iter %d J=%.6e step=%.3e pg=%.3e", iters, history[-1], step, pg)

    err = None
    if gamma_truth is not None:
        err = norm(cur.gamma - np.asarray(gamma_truth, dtype=float))
    return InversionResult(
        gamma_hat=cur.gamma.copy(), J_history=history, iterations=iters,
        final_misfit=cur.value.misfit, final_penalty=cur.value.penalty,
        l2_error_vs_truth=err, stop_reason=stop, delta=observation.delta,
        alpha=config.alpha)


@dataclass
class GradientCheck:
    adjoint: np.ndarray        # <grad J, h> per direction
    finite_diff: np.ndarray    # central differences per direction
    eps: float

    @property
    def rel_errors(self) -> np.ndarray:
        scale = np.maximum(np.maximum(np.abs(self.adjoint), np.abs(self.finite_diff)), 1e-300)
        return np.abs(self.adjoint - self.finite_diff) / scale

    @property
    def max_rel_error(self) -> float:
        return float(self.rel_errors.max())


def gradient_check(spec: ProblemSpec, observation: Observation, gamma: np.ndarray,
                   alpha: float, gamma_star: np.ndarray, n_directions: int = 5,
                   eps: float = 1e-5, seed: int = 0) -> GradientCheck:
    """Compare the adjoint gradient with central differences along random directions.

    Directions are seeded Gaussian fields of unit boundary norm; ``gamma`` must
    sit at least ``eps`` inside the box so both probes stay admissible.
    """
    grid = spec.grid
    gamma = check_admissible(gamma, spec.gamma_lower + eps, spec.gamma_upper - eps,
                             len(grid.boundary))
    problem = TikhonovProblem(spec, observation, alpha, gamma_star)
    grad = problem.gradient(problem.point(gamma))
    rng = np.random.default_rng(seed)
    ad, fd = [], []
    for _ in range(n_directions):
        h = rng.standard_normal(len(grid.boundary))
        h /= grid.norm_boundary(h)
        jp = problem.point(gamma + eps * h).value.total
        jm = problem.point(gamma - eps * h).value.total
        fd.append((jp - jm) / (2.0 * eps))
        ad.append(grid.inner_boundary(grad, h))
    return GradientCheck(np.array(ad), np.array(fd), eps)
