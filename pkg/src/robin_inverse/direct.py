"""Closed-form recovery of the Robin coefficient from exact window data.

On the boundary the Robin condition integrated over the window gives

    gamma = (int g dt - int d(phi)/d(nu) dt) / int phi dt,

which needs a normal derivative of the data, the source of the instability
that :func:`amplification_study` makes visible.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .forward import Observation
from .grid import NORMALS, Grid, TimeGrid

DENOM_FLOOR_REL = 1e-8


class DenominatorError(ValueError):
    """The time-integrated data vanish at some boundary nodes."""

    def __init__(self, message: str, nodes):
        super().__init__(message)
        self.nodes = list(nodes)


def normal_derivative(grid: Grid, values: np.ndarray) -> np.ndarray:
    """One-sided second-order outward normal derivative at the boundary nodes.

    ``values`` has nodes on the last axis. Each boundary node uses the face
    it is assigned to (corners follow the clockwise rule of the grid).
    """
    values = np.asarray(values, dtype=float)
    field = values.reshape(values.shape[:-1] + (grid.ny, grid.nx))
    out = np.empty(values.shape[:-1] + (len(grid.boundary),))
    for k, (node, normal) in enumerate(zip(grid.boundary.nodes, grid.boundary.normals)):
        j, i = divmod(int(node), grid.nx)
        axis, sign = NORMALS[normal]
        if axis == 0:
            h = grid.hx
            s0, s1, s2 = (field[..., j, i - sign * m] for m in range(3))
        else:
            h = grid.hy
            s0, s1, s2 = (field[..., j - sign * m, i] for m in range(3))
        out[..., k] = (3.0 * s0 - 4.0 * s1 + s2) / (2.0 * h)
    return out


def _window_rows(arr: np.ndarray, timegrid: TimeGrid) -> np.ndarray:
    nw = timegrid.nt - timegrid.window_start + 1
    if arr.ndim == 1:
        return np.broadcast_to(arr, (nw, arr.size))
    if arr.shape[0] == timegrid.nt + 1:
        return arr[timegrid.window_start:]
    if arr.shape[0] == nw:
        return arr
    raise ValueError(f"expected {nw} window rows or {timegrid.nt + 1} full rows, got {arr.shape[0]}")


def direct_recover(observation: Observation, g: np.ndarray, grid: Grid | None = None,
                   timegrid: TimeGrid | None = None) -> np.ndarray:
    """Quotient formula with trapezoid time integration; the result is not clipped.

    ``g`` holds flux rows for the window or for every step; a single boundary
    vector is taken as constant in time.
    """
    grid = grid or observation.grid
    timegrid = timegrid or observation.timegrid
    phi = observation.values
    g = _window_rows(np.asarray(g, dtype=float), timegrid)
    w = timegrid.window_weights

    phi_b = grid.trace(phi)
    denom = w @ phi_b
    numer = w @ g - w @ normal_derivative(grid, phi)

    floor = DENOM_FLOOR_REL * timegrid.sigma * float(np.max(np.abs(phi)))
    bad = np.flatnonzero(np.abs(denom) < floor)
    if bad.size or floor == 0.0:
        nodes = grid.boundary.nodes[bad].tolist() if bad.size else grid.boundary.nodes.tolist()
        raise DenominatorError(
            f"time-integrated data below floor {floor:.3e} at boundary nodes "
            f"{nodes[:10]}{'...' if len(nodes) > 10 else ''}; the coefficient is not "
            "recoverable where the window integral of the data vanishes", nodes)
    return numer / denom


@dataclass
class AmplificationTable:
    rows: list[tuple[float, float, float]]     # (h, err_clean, err_noisy)
    delta: float

    CSV_HEADER = "h,err_clean,err_noisy"

    @property
    def clean_decreasing(self) -> bool:
        e = [r[1] for r in self.rows]
        return all(b < a for a, b in zip(e, e[1:]))

    @property
    def noisy_growing(self) -> bool:
        return self.rows[-1][2] > self.rows[-2][2]

    def to_csv(self) -> str:
        lines = [self.CSV_HEADER] + [",".join(repr(float(v)) for v in row) for row in self.rows]
        return "\n".join(lines) + "\n"

    def write(self, path) -> Path:
        path = Path(path)
        path.write_text(self.to_csv())
        return path


def amplification_study(truth_profile: str, delta: float, grids, seed: int = 42,
                        Lx: float = 1.0, Ly: float = 1.0, tau: float = 1.0,
                        sigma: float = 0.25, steps_per_cell: int = 2, fine_factor: int = 2,
                        background=None, **spec_kw) -> AmplificationTable:
    """Direct-recovery error with and without noise under simultaneous h, dt refinement.

    ``grids`` lists interval counts per side (e.g. ``[16, 32, 64]``); each
    grid uses ``nt = steps_per_cell * n`` and data generated on a grid
    ``fine_factor`` times finer.
    """
    from .harness import NoiseSpec, add_noise, default_case

    grids = list(grids)
    if len(grids) < 3:
        raise ValueError("need >= 3 grids for an amplification study")
    rows = []
    for k, n in enumerate(grids):
        n = int(n)
        case = default_case(truth_profile, Lx, Ly, n + 1, n + 1, steps_per_cell * n, tau, sigma,
                            fine_factor, background, **spec_kw)
        truth = case.gamma_dagger
        grid = case.spec.grid
        scale = grid.norm_boundary(truth)
        clean = direct_recover(case.observation, case.spec.g)
        noisy_obs = add_noise(case.observation, NoiseSpec(delta, seed + k))
        noisy = direct_recover(noisy_obs, case.spec.g)
        rows.append((grid.hx, grid.norm_boundary(clean - truth) / scale,
                     grid.norm_boundary(noisy - truth) / scale))
    return AmplificationTable(rows, float(delta))
