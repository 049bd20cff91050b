"""Theta-scheme finite differences for the heat equation with a Robin boundary.

Semi-discrete system (lumped mass ``M``, five-point stiffness ``K``, boundary
mass ``R(gamma) = diag(w_b * gamma_b)`` on the boundary nodes)::

    M u' + (K + R(gamma)) u = M f + W g

which is exactly what ghost-point elimination of the Robin condition gives
after scaling each row by its control-volume size. All operators are
symmetric, so each step is solved with conjugate gradients.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .grid import Grid, TimeGrid


class AdmissibilityError(ValueError):
    """A coefficient left the admissible box."""


class NumericalError(RuntimeError):
    """A linear solve or a line search failed to converge."""


@dataclass(frozen=True, eq=False)
class ProblemSpec:
    grid: Grid
    timegrid: TimeGrid
    f: np.ndarray          # (nt+1, nodes)
    g: np.ndarray          # (nt+1, boundary nodes)
    u0: np.ndarray         # (nodes,)
    gamma_lower: float = 0.5
    gamma_upper: float = 5.0
    theta: float = 1.0
    cg_tol: float = 1e-12
    cg_maxiter: int = 10_000
    jacobi: bool = False
    linear_solver: str = "cg"   # "cg" or "direct"

    def __post_init__(self):
        nt, N, Nb = self.timegrid.nt, self.grid.size, len(self.grid.boundary)
        f = np.broadcast_to(np.asarray(self.f, dtype=float), (nt + 1, N))
        g = np.broadcast_to(np.asarray(self.g, dtype=float), (nt + 1, Nb))
        u0 = np.broadcast_to(np.asarray(self.u0, dtype=float), (N,))
        for name, arr in (("f", f), ("g", g), ("u0", u0)):
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} has non-finite entries")
        if not 0 < self.gamma_lower <= self.gamma_upper:
            raise ValueError("need 0 < gamma_lower <= gamma_upper, got "
                             f"{self.gamma_lower}, {self.gamma_upper}")
        if self.theta not in (0.5, 1.0):
            raise ValueError(f"theta must be 1 or 1/2, got {self.theta}")
        if self.linear_solver not in ("cg", "direct"):
            raise ValueError(f"unknown linear solver {self.linear_solver!r}")
        object.__setattr__(self, "f", f)
        object.__setattr__(self, "g", g)
        object.__setattr__(self, "u0", u0)

    def with_data(self, f=None, g=None, u0=None) -> "ProblemSpec":
        return replace(self,
                       f=self.f if f is None else f,
                       g=self.g if g is None else g,
                       u0=self.u0 if u0 is None else u0)

    def midpoint_gamma(self) -> np.ndarray:
        return np.full(len(self.grid.boundary), 0.5 * (self.gamma_lower + self.gamma_upper))


@dataclass(frozen=True, eq=False)
class SpaceTimeField:
    values: np.ndarray     # (nt+1, nodes)
    grid: Grid
    timegrid: TimeGrid

    def __post_init__(self):
        shape = (self.timegrid.nt + 1, self.grid.size)
        if self.values.shape != shape:
            raise ValueError(f"field shape {self.values.shape} != {shape}")

    @property
    def boundary_values(self) -> np.ndarray:
        return self.grid.trace(self.values)

    def at_step(self, n: int) -> np.ndarray:
        return self.values[n]


@dataclass(frozen=True, eq=False)
class Observation:
    """Samples on the window steps ``iw..nt`` plus the noise level they carry."""

    values: np.ndarray     # (nt-iw+1, nodes)
    grid: Grid
    timegrid: TimeGrid
    delta: float = 0.0

    def __post_init__(self):
        shape = (self.timegrid.nt - self.timegrid.window_start + 1, self.grid.size)
        if self.values.shape != shape:
            raise ValueError(f"observation shape {self.values.shape} != {shape}")

    def with_values(self, values: np.ndarray, delta: float) -> "Observation":
        return Observation(values, self.grid, self.timegrid, float(delta))


def window_inner(grid: Grid, timegrid: TimeGrid, a: np.ndarray, b: np.ndarray) -> float:
    """Space-time trapezoid inner product over the observation window.

    ``a`` and ``b`` hold window samples, shape ``(window steps, nodes)``.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.shape[0] != len(timegrid.window_steps):
        raise ValueError(f"window shapes {a.shape} and {b.shape} do not match the window")
    return float(timegrid.window_weights @ ((a * b) @ grid.mass))


def window_norm(grid: Grid, timegrid: TimeGrid, a: np.ndarray) -> float:
    return float(np.sqrt(window_inner(grid, timegrid, a, a)))


# ---------------------------------------------------------------------------
# operators

def _tridiag_stiffness(n: int, h: float) -> sp.csr_matrix:
    main = np.full(n, 2.0 / h)
    main[0] = main[-1] = 1.0 / h
    off = np.full(n - 1, -1.0 / h)
    return sp.diags([off, main, off], [-1, 0, 1], format="csr")


def stiffness_matrix(grid: Grid) -> sp.csr_matrix:
    """Five-point Laplacian in weak (control-volume scaled) form, Neumann rows included."""
    wx = np.full(grid.nx, grid.hx)
    wx[[0, -1]] *= 0.5
    wy = np.full(grid.ny, grid.hy)
    wy[[0, -1]] *= 0.5
    Kx = _tridiag_stiffness(grid.nx, grid.hx)
    Ky = _tridiag_stiffness(grid.ny, grid.hy)
    # node id = j*nx + i, so the y factor is the outer Kronecker index
    K = sp.kron(sp.diags(wy), Kx) + sp.kron(Ky, sp.diags(wx))
    return K.tocsr()


def boundary_mass(grid: Grid, weights_times: np.ndarray) -> sp.csr_matrix:
    """Diagonal matrix with ``weights_times`` placed on the boundary nodes."""
    d = np.zeros(grid.size)
    d[grid.boundary.nodes] = grid.boundary.weights * weights_times
    return sp.diags(d, format="csr")


def scatter_boundary(grid: Grid, values: np.ndarray) -> np.ndarray:
    """Lift boundary values ``(..., Nb)`` to nodal loads ``w_b * values`` on boundary rows."""
    values = np.asarray(values, dtype=float)
    out = np.zeros(values.shape[:-1] + (grid.size,))
    out[..., grid.boundary.nodes] = grid.boundary.weights * values
    return out


@dataclass(frozen=True, eq=False)
class StepOperator:
    implicit: sp.csr_matrix      # M + theta dt (K + R)
    explicit: sp.csr_matrix      # M - (1-theta) dt (K + R)
    mass: np.ndarray
    stiffness: sp.csr_matrix
    robin: sp.csr_matrix
    dt: float
    theta: float


def check_admissible(gamma: np.ndarray, lower: float, upper: float, n: int) -> np.ndarray:
    gamma = np.asarray(gamma, dtype=float)
    if gamma.shape != (n,):
        raise ValueError(f"gamma must have {n} boundary values, got shape {gamma.shape}")
    if not np.all(np.isfinite(gamma)):
        raise AdmissibilityError("gamma has non-finite entries")
    bad = np.flatnonzero((gamma < lower) | (gamma > upper))
    if bad.size:
        raise AdmissibilityError(
            f"gamma outside admissible box [{lower}, {upper}] at boundary nodes "
            f"{bad[:10].tolist()}{'...' if bad.size > 10 else ''}")
    return gamma


def assemble_step_operator(grid: Grid, gamma: np.ndarray, dt: float, theta: float = 1.0,
                           bounds: tuple[float, float] | None = None) -> StepOperator:
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    gamma = np.asarray(gamma, dtype=float)
    if bounds is not None:
        check_admissible(gamma, bounds[0], bounds[1], len(grid.boundary))
    M = grid.mass
    K = stiffness_matrix(grid)
    R = boundary_mass(grid, gamma)
    L = K + R
    Md = sp.diags(M)
    implicit = (Md + theta * dt * L).tocsr()
    explicit = (Md - (1.0 - theta) * dt * L).tocsr()
    return StepOperator(implicit, explicit, M, K, R, dt, theta)


def make_linear_solver(spec: ProblemSpec, A: sp.csr_matrix):
    """Return ``solve(b, x0)`` for the SPD step matrix ``A``."""
    if spec.linear_solver == "direct":
        lu = spla.splu(A.tocsc())
        return lambda b, x0=None: lu.solve(b)

    precond = None
    if spec.jacobi:
        precond = sp.diags(1.0 / A.diagonal())

    def solve(b, x0=None):
        if not np.any(b):
            return np.zeros_like(b)
        x, info = spla.cg(A, b, x0=x0, rtol=spec.cg_tol, atol=0.0,
                          maxiter=spec.cg_maxiter, M=precond)
        if info != 0:
            raise NumericalError(
                f"conjugate gradients did not reach rtol={spec.cg_tol} within "
                f"{spec.cg_maxiter} iterations (ill-conditioned step or bad dt)")
        return x

    return solve


class StepSolver:
    """Step operators and a reusable linear solver for one coefficient."""

    def __init__(self, spec: ProblemSpec, gamma: np.ndarray):
        self.spec = spec
        self.gamma = check_admissible(gamma, spec.gamma_lower, spec.gamma_upper,
                                      len(spec.grid.boundary))
        self.ops = assemble_step_operator(spec.grid, self.gamma, spec.timegrid.dt, spec.theta)
        self.solve = make_linear_solver(spec, self.ops.implicit)

    def march(self, start: np.ndarray, loads: np.ndarray) -> np.ndarray:
        """Forward recursion ``A x^{n+1} = B x^n + loads[n+1]``; ``loads[0]`` unused."""
        nt = self.spec.timegrid.nt
        out = np.empty((nt + 1, self.spec.grid.size))
        out[0] = start
        B = self.ops.explicit
        for n in range(nt):
            rhs = B @ out[n] + loads[n + 1]
            out[n + 1] = self.solve(rhs, out[n])
        return out

    def march_transpose(self, sources: np.ndarray) -> np.ndarray:
        """Backward recursion ``A p^n = B p^{n+1} + sources[n]`` for n = nt..1, p^{nt+1}=0.

        ``p^0`` does not enter any pairing and is left at zero.
        """
        nt = self.spec.timegrid.nt
        out = np.zeros((nt + 1, self.spec.grid.size))
        B = self.ops.explicit
        nxt = np.zeros(self.spec.grid.size)
        for n in range(nt, 0, -1):
            rhs = B @ nxt + sources[n]
            out[n] = self.solve(rhs, nxt)
            nxt = out[n]
        return out

    def theta_blend(self, arr: np.ndarray) -> np.ndarray:
        """Rows ``theta*a[n] + (1-theta)*a[n-1]`` for n >= 1, row 0 zeroed."""
        th = self.spec.theta
        out = np.zeros_like(arr)
        out[1:] = th * arr[1:] + (1.0 - th) * arr[:-1]
        return out


def forward_loads(spec: ProblemSpec, solver: StepSolver) -> np.ndarray:
    dt = spec.timegrid.dt
    f = solver.theta_blend(spec.f)
    g = solver.theta_blend(spec.g)
    return dt * (f * spec.grid.mass + scatter_boundary(spec.grid, g))


def solve_forward(spec: ProblemSpec, gamma: np.ndarray, solver: StepSolver | None = None
                  ) -> SpaceTimeField:
    """March the theta-scheme from ``u0``; returns all steps including ``t=0``."""
    solver = solver or StepSolver(spec, gamma)
    values = solver.march(spec.u0, forward_loads(spec, solver))
    return SpaceTimeField(values, spec.grid, spec.timegrid)


def restrict_to_window(u: SpaceTimeField, timegrid: TimeGrid | None = None) -> Observation:
    timegrid = timegrid or u.timegrid
    if timegrid.nt != u.timegrid.nt:
        raise ValueError("time grid does not match the field")
    iw = timegrid.window_start
    if iw > timegrid.nt - 1:
        raise ValueError("empty observation window")
    return Observation(u.values[iw:].copy(), u.grid, timegrid, 0.0)


# ---------------------------------------------------------------------------
# norms used by the stability estimate

def energy_norms(spec: ProblemSpec, values: np.ndarray) -> tuple[float, float]:
    """``(max_n ||u^n||_L2, (sum_n dt ||u^n||_H1^2)^(1/2))`` for a trajectory."""
    M = spec.grid.mass
    K = stiffness_matrix(spec.grid)
    l2sq = values ** 2 @ M
    h1sq = l2sq + np.einsum("ni,ni->n", values, (K @ values.T).T)
    dt = spec.timegrid.dt
    return float(np.sqrt(l2sq.max())), float(np.sqrt(dt * h1sq[1:].sum()))


def data_norms(spec: ProblemSpec) -> float:
    """``||f||_{L2(L2)} + ||g||_{L2(L2(boundary))} + ||u0||_{L2}`` with rectangle rule in time."""
    dt = spec.timegrid.dt
    M = spec.grid.mass
    W = spec.grid.boundary.weights
    nf = np.sqrt(dt * (spec.f[1:] ** 2 @ M).sum())
    ng = np.sqrt(dt * (spec.g[1:] ** 2 @ W).sum())
    n0 = np.sqrt(spec.u0 ** 2 @ M)
    return float(nf + ng + n0)


# ---------------------------------------------------------------------------
# plain-text trajectory dump: header line "nx,ny,nt,Lx,Ly,tau", then one row per step

def save_field_csv(u: SpaceTimeField, path) -> Path:
    path = Path(path)
    g, tg = u.grid, u.timegrid
    with path.open("w") as fh:
        fh.write(f"{g.nx},{g.ny},{tg.nt},{g.Lx!r},{g.Ly!r},{tg.tau!r}\n")
        np.savetxt(fh, u.values, delimiter=",", fmt="%.17g")
    return path


def load_field_csv(path, sigma: float | None = None) -> SpaceTimeField:
    from .grid import build_grid

    path = Path(path)
    with path.open() as fh:
        head = fh.readline().strip().split(",")
        nx, ny, nt = (int(v) for v in head[:3])
        Lx, Ly, tau = (float(v) for v in head[3:6])
        values = np.loadtxt(fh, delimiter=",", ndmin=2)
    grid = build_grid(Lx, Ly, nx, ny)
    timegrid = TimeGrid(tau, nt, tau if sigma is None else sigma)
    return SpaceTimeField(values, grid, timegrid)
