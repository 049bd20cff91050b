import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from robin_inverse import GridError, TimeGrid, build_grid, fit_slope
from robin_inverse.grid import inner_product_boundary, inner_product_interior

sides = st.floats(min_value=0.1, max_value=10.0, allow_nan=False)
counts = st.integers(min_value=3, max_value=25)


def test_three_by_three():
    g = build_grid(1, 1, 3, 3)
    assert g.hx == g.hy == 0.5
    assert g.size == 9
    assert len(g.boundary) == 8


def test_two_by_two_is_too_coarse():
    with pytest.raises(GridError, match="grid too coarse"):
        build_grid(1, 1, 2, 2)


def test_rectangle_counts():
    g = build_grid(2, 1, 5, 3)
    assert (g.hx, g.hy) == (0.5, 0.5)
    assert len(g.boundary) == 12


def test_nonpositive_side_rejected():
    with pytest.raises(GridError):
        build_grid(0.0, 1.0, 5, 5)


@settings(max_examples=40, deadline=None)
@given(sides, sides, counts, counts)
def test_boundary_index_invariants(Lx, Ly, nx, ny):
    g = build_grid(Lx, Ly, nx, ny)
    b = g.boundary
    assert len(b) == 2 * nx + 2 * ny - 4
    assert len(set(b.nodes.tolist())) == len(b)
    j, i = np.divmod(np.arange(g.size), nx)
    lattice = np.flatnonzero((i == 0) | (i == nx - 1) | (j == 0) | (j == ny - 1))
    assert sorted(b.nodes.tolist()) == lattice.tolist()
    assert math.isclose(b.weights.sum(), 2 * (Lx + Ly), rel_tol=1e-12)


def test_corner_rule():
    g = build_grid(1, 1, 4, 5)
    normal = dict(zip(g.boundary.nodes.tolist(), g.boundary.normals))
    assert normal[g.node_id(0, 0)] == "-x"
    assert normal[g.node_id(0, 4)] == "+y"
    assert normal[g.node_id(3, 4)] == "+x"
    assert normal[g.node_id(3, 0)] == "-y"
    # corners carry half an edge from each side
    w = dict(zip(g.boundary.nodes.tolist(), g.boundary.weights))
    assert math.isclose(w[0], 0.5 * g.hx + 0.5 * g.hy)


def test_boundary_starts_at_origin_and_walks_clockwise():
    g = build_grid(1, 1, 4, 4)
    xb, yb = g.boundary_coordinates()
    assert (xb[0], yb[0]) == (0.0, 0.0)
    assert (xb[1], yb[1]) == (0.0, g.hy)


class TestInteriorProduct:
    def test_constant_one(self):
        g = build_grid(1, 1, 7, 5)
        one = np.ones(g.size)
        assert math.isclose(inner_product_interior(g, one, one), 1.0, rel_tol=1e-12)

    def test_zero(self):
        g = build_grid(1, 1, 7, 5)
        assert inner_product_interior(g, np.ones(g.size), np.zeros(g.size)) == 0.0

    def test_x_squared_matches_trapezoid_oracle(self):
        # composite trapezoid of x^2 on [0, 1] is 1/3 + h^2/6; y direction is exact
        g = build_grid(1, 1, 11, 7)
        X, _ = g.coordinates()
        val = inner_product_interior(g, X, X)
        assert math.isclose(val, 1.0 / 3.0 + g.hx ** 2 / 6.0, rel_tol=1e-13)
        assert abs(val - 1.0 / 3.0) < g.hx ** 2

    def test_size_mismatch(self):
        g = build_grid(1, 1, 4, 4)
        with pytest.raises(GridError, match="size mismatch"):
            inner_product_interior(g, np.ones(16), np.ones(15))


class TestBoundaryProduct:
    def test_perimeter(self):
        g = build_grid(1, 1, 9, 9)
        one = np.ones(len(g.boundary))
        assert math.isclose(inner_product_boundary(g, one, one), 4.0, rel_tol=1e-12)
        assert math.isclose(g.norm_boundary(one), 2.0, rel_tol=1e-12)

    def test_x_line_integral(self):
        g = build_grid(1, 1, 6, 9)
        xb, _ = g.boundary_coordinates()
        val = inner_product_boundary(g, np.ones_like(xb), xb)
        assert abs(val - 2.0) <= 1e-12

    def test_zero(self):
        g = build_grid(1, 1, 5, 5)
        z = np.zeros(len(g.boundary))
        assert inner_product_boundary(g, z, z) == 0.0

    def test_size_mismatch(self):
        g = build_grid(1, 1, 4, 4)
        with pytest.raises(GridError):
            inner_product_boundary(g, np.ones(12), np.ones(11))


@settings(max_examples=30, deadline=None)
@given(counts, counts, st.integers(0, 2 ** 32 - 1))
def test_products_symmetric_bilinear_positive(nx, ny, seed):
    g = build_grid(1.3, 0.7, nx, ny)
    rng = np.random.default_rng(seed)
    for n, ip in ((g.size, g.inner_interior), (len(g.boundary), g.inner_boundary)):
        a, b, c = rng.standard_normal((3, n))
        s = rng.uniform(-3, 3)
        assert math.isclose(ip(a, b), ip(b, a), rel_tol=1e-12, abs_tol=1e-12)
        assert math.isclose(ip(s * a + c, b), s * ip(a, b) + ip(c, b),
                            rel_tol=1e-10, abs_tol=1e-10)
        assert ip(a, a) > 0


def test_constants_restrict_to_perimeter_times_value():
    g = build_grid(2.0, 0.5, 9, 6)
    c = 3.25
    trace = g.trace(np.full(g.size, c))
    assert math.isclose(g.inner_boundary(np.ones_like(trace), trace), c * g.perimeter,
                        rel_tol=1e-12)
    assert math.isclose(g.inner_interior(np.ones(g.size), np.full(g.size, c)), c * g.area,
                        rel_tol=1e-12)


def test_quadrature_refinement_second_order():
    def fn(x, y):
        return np.sin(x) * np.exp(y)

    exact_area = (1 - math.cos(1.0)) * (math.e - 1)
    # boundary: sides x=0 (0), x=1 (sin 1 (e-1)), y=0 (1-cos 1), y=1 (e (1-cos 1))
    exact_line = math.sin(1.0) * (math.e - 1) + (1 - math.cos(1.0)) * (1 + math.e)
    area_pts, line_pts = [], []
    for n in (9, 17, 33, 65):
        g = build_grid(1, 1, n, n)
        area_pts.append((g.hx, abs(g.inner_interior(np.ones(g.size), g.evaluate(fn))
                                    - exact_area)))
        fb = g.evaluate_boundary(fn)
        line_pts.append((g.hx, abs(g.inner_boundary(np.ones_like(fb), fb) - exact_line)))
    assert fit_slope(area_pts)[0] >= 1.9
    assert fit_slope(line_pts)[0] >= 1.9


class TestTimeGrid:
    def test_window_indices(self):
        tg = TimeGrid(1.0, 32, 0.25)
        assert tg.window_start == 24
        assert tg.window_steps.tolist() == list(range(24, 33))

    def test_full_window(self):
        assert TimeGrid(1.0, 10, 1.0).window_start == 0

    def test_window_weights_sum_to_sigma(self):
        tg = TimeGrid(2.0, 40, 0.5)
        assert math.isclose(tg.window_weights.sum(), 0.5, rel_tol=1e-12)

    def test_empty_window(self):
        with pytest.raises(GridError, match="empty observation window"):
            TimeGrid(1.0, 4, 0.1)

    @pytest.mark.parametrize("sigma", [0.0, -0.1, 1.5])
    def test_bad_sigma(self, sigma):
        with pytest.raises(GridError):
            TimeGrid(1.0, 8, sigma)
