"""Construction and numerical check of the source representer ``psi``.

Given the true-coefficient trajectory ``u`` on the window and interior
extensions ``Y_dag``, ``Y_star`` of the true coefficient and the initial guess,

    u1(x) = int q(t) psi1(t) u(x,t) dt
    u2(x) = int q(t) psi2(t) chi(x) u(x,t) dt
    psi   = q(t) * (psi2(t) chi(x) + psi1(t) (Y_dag - Y_star - u2)(x) / u1(x))

with the window polynomial ``q(t) = (tau - t)(tau - sigma - t)``. Then
``int u psi dt = Y_dag - Y_star`` pointwise, in particular on the boundary.
``q`` is negative inside the window and ``u1`` carries that sign.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np
from scipy import integrate

from .forward import SpaceTimeField
from .grid import TimeGrid

U1_FLOOR_REL = 1e-10


class SourceConditionError(ValueError):
    pass


def window_polynomial(timegrid: TimeGrid) -> np.ndarray:
    """``(tau - t)(tau - sigma - t)`` on the window steps, exactly zero at the endpoints."""
    tg = timegrid
    n = tg.window_steps
    to_end = (tg.nt - n) * tg.dt
    start = tg.tau - tg.sigma
    if math.isclose(tg.window_start * tg.dt, start, rel_tol=0, abs_tol=1e-12 * tg.tau):
        to_start = (tg.window_start - n) * tg.dt
    else:
        to_start = start - n * tg.dt
    return to_end * to_start


def simpson_weights(n_intervals: int, h: float) -> np.ndarray:
    """Weights of :func:`scipy.integrate.simpson` on a uniform grid, any interval count."""
    if n_intervals < 2:
        raise ValueError("Simpson weights need at least two intervals")
    # simpson is linear in the samples, so the identity reveals its weights
    return integrate.simpson(np.eye(n_intervals + 1), dx=h, axis=0)


def _profile(p, times: np.ndarray) -> np.ndarray:
    if p is None:
        return np.ones_like(times)
    if callable(p):
        return np.broadcast_to(np.asarray(p(times), dtype=float), times.shape).copy()
    arr = np.asarray(p, dtype=float)
    if arr.ndim == 0:
        return np.full_like(times, float(arr))
    if arr.shape != times.shape:
        raise ValueError(f"time profile has {arr.shape} samples, window has {times.shape}")
    return arr


def _nodal(a, n: int) -> np.ndarray:
    arr = np.asarray(0.0 if a is None else a, dtype=float)
    return np.broadcast_to(arr, (n,)).copy()


@dataclass(frozen=True, eq=False)
class SourceCertificate:
    psi: np.ndarray           # (window steps, nodes)
    timegrid: TimeGrid
    residual_rel: float
    u1_min_abs: float
    u1: np.ndarray
    u2: np.ndarray

    CSV_HEADER = "residual_rel,u1_min_abs,nt_window"

    @property
    def nt_window(self) -> int:
        return self.psi.shape[0] - 1

    def csv_row(self) -> str:
        return f"{float(self.residual_rel)!r},{float(self.u1_min_abs)!r},{self.nt_window}"

    def write(self, path) -> Path:
        path = Path(path)
        path.write_text(self.CSV_HEADER + "\n" + self.csv_row() + "\n")
        return path


def construct_psi(u: SpaceTimeField, upsilon_dagger, upsilon_star,
                  psi1: Callable | np.ndarray | float | None = None,
                  psi2: Callable | np.ndarray | float | None = None,
                  chi=None) -> SourceCertificate:
    """Build ``psi`` nodewise and certify it with :func:`verify_source_condition`.

    Profiles default to ``psi1 = psi2 = 1`` and ``chi = 0``.
    """
    grid, tg = u.grid, u.timegrid
    N = grid.size
    iw = tg.window_start
    uw = u.values[iw:]
    times = tg.window_times
    q = window_polynomial(tg)
    p1 = _profile(psi1, times)
    p2 = _profile(psi2, times)
    chi = _nodal(chi, N)
    diff = _nodal(upsilon_dagger, N) - _nodal(upsilon_star, N)

    w = simpson_weights(tg.nt - iw, tg.dt)
    u1 = (w * q * p1) @ uw
    u2 = chi * ((w * q * p2) @ uw)

    floor = U1_FLOOR_REL * float(np.max(np.abs(u.values)))
    small = np.flatnonzero(~(np.abs(u1) >= floor))
    if small.size or floor == 0.0:
        raise SourceConditionError(
            f"|u1| below floor {floor:.3e} at {small.size or N} nodes: the true "
            "temperature is (nearly) zero over the window there, so the coefficient "
            "cannot be recovered on that part of the boundary")

    psi = q[:, None] * (p2[:, None] * chi[None, :] + p1[:, None] * ((diff - u2) / u1)[None, :])
    gd = grid.trace(_nodal(upsilon_dagger, N))
    gs = grid.trace(_nodal(upsilon_star, N))
    res = verify_source_condition(u, psi, gd, gs)
    return SourceCertificate(psi, tg, res, float(np.min(np.abs(u1))), u1, u2)


def verify_source_condition(u: SpaceTimeField, psi, gamma_dagger, gamma_star,
                            with_flag: bool = False):
    """Relative boundary residual of ``int u psi dt = gamma_dagger - gamma_star``.

    Integrates with :func:`scipy.integrate.simpson` on the boundary trace only.
    When ``gamma_dagger == gamma_star`` the absolute residual is returned; pass
    ``with_flag=True`` to get ``(residual, is_relative)``.
    """
    if isinstance(psi, SourceCertificate):
        psi = psi.psi
    grid, tg = u.grid, u.timegrid
    psi = np.asarray(psi, dtype=float)
    iw = tg.window_start
    if psi.shape != (tg.nt - iw + 1, grid.size):
        raise ValueError(f"psi shape {psi.shape} does not match the window of u")
    ub = grid.trace(u.values[iw:])
    pb = grid.trace(psi)
    integral = integrate.simpson(ub * pb, x=tg.window_times, axis=0)
    target = np.asarray(gamma_dagger, dtype=float) - np.asarray(gamma_star, dtype=float)
    resid = grid.norm_boundary(integral - target)
    scale = grid.norm_boundary(target)
    if scale == 0.0:
        return (resid, False) if with_flag else resid
    return (resid / scale, True) if with_flag else resid / scale
