"""Shared builders for the test suite."""
import numpy as np

from robin_inverse import Background, ProblemSpec, TimeGrid, build_grid, solve_forward
from robin_inverse.harness import synthetic_spec

# e^{-t} cos(pi x) cos(pi y) on the unit square; normal derivative vanishes on every face
MMS = Background(base=0.0, amp=1.0, rate=1.0)


def mms_gamma(grid):
    return grid.evaluate_boundary(lambda x, y: 1.0 + 0.5 * x + 0.25 * y)


def mms_spec(n, nt, theta=1.0, tau=1.0, **kw):
    grid = build_grid(1.0, 1.0, n, n)
    tg = TimeGrid(tau, nt, 0.25)
    return synthetic_spec(grid, tg, mms_gamma(grid), MMS, theta=theta, **kw)


def mms_final_error(n, nt, **kw):
    """L2 error at t = tau against the closed form."""
    spec = mms_spec(n, nt, **kw)
    u = solve_forward(spec, mms_gamma(spec.grid))
    exact = MMS.u(spec.grid, spec.timegrid.tau)
    return spec.grid.norm_interior(u.values[-1] - exact), u


def constant_spec(n=9, nt=16, c=1.7, gamma=None, **kw):
    grid = build_grid(1.0, 1.0, n, n)
    tg = TimeGrid(1.0, nt, 0.25)
    gamma = np.full(len(grid.boundary), 2.0) if gamma is None else gamma
    return ProblemSpec(grid, tg, 0.0, gamma * c, c, **kw), gamma


def random_spec(rng, n=9, nt=16, sigma=0.25, **kw):
    grid = build_grid(1.0, 1.0, n, n)
    tg = TimeGrid(1.0, nt, sigma)
    f = rng.standard_normal((nt + 1, grid.size))
    g = rng.standard_normal((nt + 1, len(grid.boundary)))
    u0 = rng.standard_normal(grid.size)
    return ProblemSpec(grid, tg, f, g, u0, **kw)


def random_gamma(rng, spec):
    return rng.uniform(spec.gamma_lower, spec.gamma_upper, len(spec.grid.boundary))
