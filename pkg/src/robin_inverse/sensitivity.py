"""Linearized response, discrete adjoint and the gradient of the Tikhonov functional.

The adjoint is the algebraic transpose of the marching scheme in
:mod:`robin_inverse.forward`. With forward steps ``A u^{n} = B u^{n-1} + b^n``
the adjoint runs ``A p^n = B p^{n+1} + r^n`` backward from ``p^{nt+1} = 0``,
where ``r^n`` is the window residual source. Pairing the sensitivity equation
with ``p`` gives, per boundary node ``b``,

    dJ/dgamma_b = -sum_{n>=1} dt * p^n_b * (theta u^n_b + (1-theta) u^{n-1}_b)
                  + 2 alpha (gamma_b - gamma*_b)

as an L2(boundary) gradient. For theta = 1 ``u^n`` pairs with ``p^n``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .forward import (Observation, ProblemSpec, SpaceTimeField, StepSolver,
                      scatter_boundary)


@dataclass(frozen=True, eq=False)
class AdjointState:
    p: SpaceTimeField
    gamma: np.ndarray
    residual: np.ndarray      # u - observation on the window steps


def _check_trajectory(spec: ProblemSpec, u: SpaceTimeField):
    if u.grid is not spec.grid and (u.grid.nx, u.grid.ny) != (spec.grid.nx, spec.grid.ny):
        raise ValueError("trajectory lives on a different spatial grid")
    if u.timegrid.nt != spec.timegrid.nt:
        raise ValueError(f"trajectory has {u.timegrid.nt} steps, problem has {spec.timegrid.nt}")


def solve_sensitivity(spec: ProblemSpec, gamma: np.ndarray, u: SpaceTimeField,
                      h: np.ndarray, solver: StepSolver | None = None) -> SpaceTimeField:
    """Directional derivative ``v = u'(gamma) h``.

    Same scheme as the forward solve with zero initial state, zero source
    and boundary datum ``-h * u`` on the boundary nodes.
    """
    _check_trajectory(spec, u)
    h = np.asarray(h, dtype=float)
    if h.shape != (len(spec.grid.boundary),):
        raise ValueError(f"direction must have {len(spec.grid.boundary)} entries")
    solver = solver or StepSolver(spec, gamma)
    datum = -h * solver.theta_blend(u.boundary_values)
    loads = spec.timegrid.dt * scatter_boundary(spec.grid, datum)
    values = solver.march(np.zeros(spec.grid.size), loads)
    return SpaceTimeField(values, spec.grid, spec.timegrid)


def solve_adjoint_window(spec: ProblemSpec, gamma: np.ndarray, window_source: np.ndarray,
                         solver: StepSolver | None = None) -> SpaceTimeField:
    """Adjoint for the functional ``v -> <v, window_source>`` over the window.

    The pairing uses the space-time trapezoid rule, so the source injected at
    window step ``n`` is ``c_n * M * window_source[n]``.
    """
    tg = spec.timegrid
    window_source = np.asarray(window_source, dtype=float)
    iw = tg.window_start
    if window_source.shape != (tg.nt - iw + 1, spec.grid.size):
        raise ValueError(f"window source shape {window_source.shape} does not match the window")
    solver = solver or StepSolver(spec, gamma)
    sources = np.zeros((tg.nt + 1, spec.grid.size))
    sources[iw:] = tg.window_weights[:, None] * window_source * spec.grid.mass
    values = solver.march_transpose(sources)
    return SpaceTimeField(values, spec.grid, tg)


def solve_adjoint(spec: ProblemSpec, gamma: np.ndarray, u: SpaceTimeField,
                  observation: Observation, solver: StepSolver | None = None) -> AdjointState:
    _check_trajectory(spec, u)
    if observation.values.shape != (spec.timegrid.nt - spec.timegrid.window_start + 1,
                                    spec.grid.size):
        raise ValueError("observation does not match the problem grids")
    residual = u.values[spec.timegrid.window_start:] - observation.values
    p = solve_adjoint_window(spec, gamma, 2.0 * residual, solver)
    return AdjointState(p, np.asarray(gamma, dtype=float), residual)


def boundary_pairing(spec: ProblemSpec, u: SpaceTimeField, p: SpaceTimeField) -> np.ndarray:
    """``sum_{n>=1} dt * p^n * (theta u^n + (1-theta) u^{n-1})`` on the boundary nodes."""
    th = spec.theta
    ub = u.boundary_values
    pb = p.boundary_values
    blend = th * ub[1:] + (1.0 - th) * ub[:-1]
    return spec.timegrid.dt * np.sum(pb[1:] * blend, axis=0)


def gradient_J(spec: ProblemSpec, gamma: np.ndarray, u: SpaceTimeField, p,
               alpha: float, gamma_star: np.ndarray) -> np.ndarray:
    """L2(boundary) gradient of the Tikhonov functional at ``gamma``."""
    if isinstance(p, AdjointState):
        p = p.p
    gamma = np.asarray(gamma, dtype=float)
    gamma_star = np.asarray(gamma_star, dtype=float)
    if gamma.shape != gamma_star.shape or gamma.shape != (len(spec.grid.boundary),):
        raise ValueError("gamma and gamma_star must be boundary fields of equal size")
    return -boundary_pairing(spec, u, p) + 2.0 * alpha * (gamma - gamma_star)
