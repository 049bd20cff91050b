"""Tensor grids on a rectangle, its boundary trace, and trapezoid inner products.

Nodes are numbered row-major: node ``(i, j)`` with ``x = i*hx``, ``y = j*hy``
has id ``j*nx + i``.

The boundary is walked clockwise starting at the origin corner::

    left   (x=0):  j = 0 .. ny-2     normal -x
    top    (y=Ly): i = 0 .. nx-2     normal +y
    right  (x=Lx): j = ny-1 .. 1     normal +x
    bottom (y=0):  i = nx-1 .. 1     normal -y

so every corner belongs to the face that the walk enters from it. Corner
weights are the sum of the two adjacent half edges.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

# outward normal labels, as (axis, sign)
NORMALS = {"-x": (0, -1), "+x": (0, 1), "-y": (1, -1), "+y": (1, 1)}


class GridError(ValueError):
    pass


@dataclass(frozen=True)
class BoundaryIndex:
    nodes: np.ndarray      # node ids, clockwise
    normals: tuple         # one of NORMALS keys per node
    weights: np.ndarray    # trapezoid line weights

    def __len__(self) -> int:
        return len(self.nodes)


@dataclass(frozen=True, eq=False)
class Grid:
    Lx: float
    Ly: float
    nx: int
    ny: int
    boundary: BoundaryIndex = field(init=False, repr=False)
    mass: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.nx < 3 or self.ny < 3:
            raise GridError("grid too coarse for ghost-point Robin stencil "
                            f"(nx={self.nx}, ny={self.ny}; need >= 3)")
        if not (self.Lx > 0 and self.Ly > 0):
            raise GridError(f"side lengths must be positive, got {self.Lx}, {self.Ly}")
        object.__setattr__(self, "boundary", _build_boundary(self))
        wx = _trapezoid_weights(self.nx, self.hx)
        wy = _trapezoid_weights(self.ny, self.hy)
        mass = np.outer(wy, wx).ravel()
        mass.flags.writeable = False
        object.__setattr__(self, "mass", mass)

    @property
    def hx(self) -> float:
        return self.Lx / (self.nx - 1)

    @property
    def hy(self) -> float:
        return self.Ly / (self.ny - 1)

    @property
    def size(self) -> int:
        return self.nx * self.ny

    @property
    def perimeter(self) -> float:
        return 2.0 * (self.Lx + self.Ly)

    @property
    def area(self) -> float:
        return self.Lx * self.Ly

    @property
    def x(self) -> np.ndarray:
        return np.linspace(0.0, self.Lx, self.nx)

    @property
    def y(self) -> np.ndarray:
        return np.linspace(0.0, self.Ly, self.ny)

    def coordinates(self) -> tuple[np.ndarray, np.ndarray]:
        """Nodal x and y coordinates as flat arrays in node order."""
        X, Y = np.meshgrid(self.x, self.y)
        return X.ravel(), Y.ravel()

    def boundary_coordinates(self) -> tuple[np.ndarray, np.ndarray]:
        X, Y = self.coordinates()
        b = self.boundary.nodes
        return X[b], Y[b]

    def node_id(self, i: int, j: int) -> int:
        return j * self.nx + i

    def evaluate(self, fn) -> np.ndarray:
        """Sample ``fn(x, y)`` at all nodes."""
        X, Y = self.coordinates()
        return np.asarray(np.broadcast_to(fn(X, Y), X.shape), dtype=float).copy()

    def evaluate_boundary(self, fn) -> np.ndarray:
        X, Y = self.boundary_coordinates()
        return np.asarray(np.broadcast_to(fn(X, Y), X.shape), dtype=float).copy()

    def trace(self, field_values: np.ndarray) -> np.ndarray:
        """Restrict nodal values (last axis = nodes) to the boundary nodes."""
        return np.asarray(field_values)[..., self.boundary.nodes]

    def inner_interior(self, a, b) -> float:
        return inner_product_interior(self, a, b)

    def inner_boundary(self, a, b) -> float:
        return inner_product_boundary(self, a, b)

    def norm_boundary(self, a) -> float:
        return math.sqrt(inner_product_boundary(self, a, a))

    def norm_interior(self, a) -> float:
        return math.sqrt(inner_product_interior(self, a, a))


def build_grid(Lx: float, Ly: float, nx: int, ny: int) -> Grid:
    return Grid(float(Lx), float(Ly), int(nx), int(ny))


def _trapezoid_weights(n: int, h: float) -> np.ndarray:
    w = np.full(n, h)
    w[0] = w[-1] = 0.5 * h
    return w


def _build_boundary(grid: Grid) -> BoundaryIndex:
    nx, ny, hx, hy = grid.nx, grid.ny, grid.hx, grid.hy
    ids, normals, weights = [], [], []

    def add(i, j, normal):
        ids.append(j * nx + i)
        normals.append(normal)
        # half edge along x contributes when the node touches a horizontal face, etc.
        w = 0.0
        on_x_face = i in (0, nx - 1)
        on_y_face = j in (0, ny - 1)
        if on_x_face:
            w += hy if 0 < j < ny - 1 else 0.5 * hy
        if on_y_face:
            w += hx if 0 < i < nx - 1 else 0.5 * hx
        weights.append(w)

    for j in range(0, ny - 1):
        add(0, j, "-x")
    for i in range(0, nx - 1):
        add(i, ny - 1, "+y")
    for j in range(ny - 1, 0, -1):
        add(nx - 1, j, "+x")
    for i in range(nx - 1, 0, -1):
        add(i, 0, "-y")

    nodes = np.array(ids, dtype=np.intp)
    w = np.array(weights)
    nodes.flags.writeable = False
    w.flags.writeable = False
    return BoundaryIndex(nodes=nodes, normals=tuple(normals), weights=w)


def _check(a: np.ndarray, b: np.ndarray, n: int, what: str):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape[-1] != n or b.shape[-1] != n:
        raise GridError(f"{what} size mismatch: expected {n} values, "
                        f"got {a.shape[-1]} and {b.shape[-1]}")
    return a, b


def inner_product_interior(grid: Grid, a, b) -> float:
    """Tensor-trapezoid approximation of the integral of ``a*b`` over the rectangle."""
    a, b = _check(a, b, grid.size, "interior field")
    return float(np.sum(grid.mass * a * b))


def inner_product_boundary(grid: Grid, a, b) -> float:
    """Composite trapezoid line integral of ``a*b`` over the boundary."""
    a, b = _check(a, b, len(grid.boundary), "boundary field")
    return float(np.sum(grid.boundary.weights * a * b))


@dataclass(frozen=True)
class TimeGrid:
    """Uniform steps ``t_n = n*dt``, ``n = 0..nt``, on ``[0, tau]`` with an
    observation window ``[tau - sigma, tau]``."""

    tau: float
    nt: int
    sigma: float

    def __post_init__(self):
        if self.nt < 1:
            raise GridError(f"nt must be >= 1, got {self.nt}")
        if not self.tau > 0:
            raise GridError(f"tau must be positive, got {self.tau}")
        if not (0 < self.sigma < self.tau or math.isclose(self.sigma, self.tau)):
            raise GridError(f"need 0 < sigma <= tau, got sigma={self.sigma}, tau={self.tau}")
        if self.window_start >= self.nt:
            raise GridError(f"empty observation window: sigma={self.sigma} is "
                            f"shorter than one step dt={self.dt}")

    @property
    def dt(self) -> float:
        return self.tau / self.nt

    @property
    def window_start(self) -> int:
        # smallest n with n*dt >= tau - sigma, forgiving round-off
        start = (self.tau - self.sigma) / self.dt
        return max(0, int(math.ceil(start - 1e-9)))

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.nt + 1) * self.dt

    @property
    def window_steps(self) -> np.ndarray:
        return np.arange(self.window_start, self.nt + 1)

    @property
    def window_times(self) -> np.ndarray:
        return self.window_steps * self.dt

    @property
    def window_weights(self) -> np.ndarray:
        """Trapezoid weights in time over the window steps."""
        return _trapezoid_weights(self.nt - self.window_start + 1, self.dt)
