import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from robin_inverse import (AdmissibilityError, InversionResult, LineSearchError, NoiseSpec,
                           TikhonovConfig, add_noise, build_grid, choose_alpha, default_case,
                           evaluate_J, minimize, project_admissible, restrict_to_window,
                           solve_forward)
from robin_inverse.inversion import ALPHA_FLOOR, TikhonovProblem


@pytest.fixture(scope="module")
def small_case():
    return default_case("bump", nx=13, ny=13, nt=24, linear_solver="direct")


def _gstar(case, value=1.5):
    return np.full(len(case.spec.grid.boundary), value)


class TestEvaluateJ:
    def test_zero_at_exact_fit(self, small_case):
        spec = small_case.spec
        gamma = _gstar(small_case, 2.0)
        obs = restrict_to_window(solve_forward(spec, gamma))
        assert evaluate_J(spec, gamma, obs, 0.3, gamma) == 0.0

    def test_doubling_alpha_doubles_penalty(self, small_case):
        spec, obs = small_case.spec, small_case.observation
        g = small_case.gamma_dagger
        a = evaluate_J(spec, g, obs, 0.1, _gstar(small_case), parts=True)
        b = evaluate_J(spec, g, obs, 0.2, _gstar(small_case), parts=True)
        assert b.penalty == 2 * a.penalty
        assert b.misfit == a.misfit
        assert a.total == a.misfit + a.penalty

    def test_inadmissible(self, small_case):
        with pytest.raises(AdmissibilityError):
            evaluate_J(small_case.spec, _gstar(small_case, 7.0), small_case.observation, 1.0,
                       _gstar(small_case))

    @pytest.mark.parametrize("delta", [1e-1, 1e-2, 1e-3])
    def test_bound_at_truth_for_exact_level_noise(self, small_case, delta):
        # data of the discrete model at the truth, perturbed at exactly level delta
        spec, gd = small_case.spec, small_case.gamma_dagger
        clean = restrict_to_window(solve_forward(spec, gd))
        obs = add_noise(clean, NoiseSpec(delta, 3))
        gs = _gstar(small_case)
        J = evaluate_J(spec, gd, obs, delta, gs)
        assert J <= delta ** 2 + delta * spec.grid.norm_boundary(gd - gs) ** 2 + 1e-10


class TestProjection:
    def test_inside_unchanged(self):
        g = np.array([0.5, 1.0, 4.9, 5.0])
        np.testing.assert_array_equal(project_admissible(g, 0.5, 5.0), g)

    def test_clip_above(self):
        np.testing.assert_array_equal(project_admissible(np.full(5, 6.0), 0.5, 5.0),
                                      np.full(5, 5.0))

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2 ** 32 - 1))
    def test_idempotent_and_nonexpansive(self, seed):
        grid = build_grid(1, 1, 9, 9)
        rng = np.random.default_rng(seed)
        for _ in range(10):
            a, b = rng.uniform(-5, 10, (2, len(grid.boundary)))
            pa, pb = project_admissible(a, 0.5, 5.0), project_admissible(b, 0.5, 5.0)
            np.testing.assert_array_equal(project_admissible(pa, 0.5, 5.0), pa)
            assert grid.norm_boundary(pa - pb) <= grid.norm_boundary(a - b)


class TestChooseAlpha:
    def test_examples(self):
        assert choose_alpha(1e-2, 1.0) == 1e-2
        assert choose_alpha(0.0, 1.0) == ALPHA_FLOOR == 1e-10
        assert math.isclose(choose_alpha(1e-3, 0.5), 5e-4, rel_tol=1e-15)

    @pytest.mark.parametrize("args", [(-1.0, 1.0), (1e-2, 0.0)])
    def test_invalid(self, args):
        with pytest.raises(ValueError):
            choose_alpha(*args)

    def test_config_rejects_nonpositive_alpha(self):
        with pytest.raises(ValueError):
            TikhonovConfig(alpha=0.0, gamma_star=np.ones(3))


def test_stationary_start_returns_immediately(small_case):
    spec = small_case.spec
    gamma = _gstar(small_case, 2.2)
    obs = restrict_to_window(solve_forward(spec, gamma))
    res = minimize(spec, obs, TikhonovConfig(alpha=1e-3, gamma_star=gamma))
    assert res.iterations <= 1
    np.testing.assert_array_equal(res.gamma_hat, gamma)
    assert res.stop_reason == "grad_tol"


def test_default_start_is_projected_prior(small_case):
    spec = small_case.spec
    obs = add_noise(small_case.observation, NoiseSpec(1e-2, 1))
    res = minimize(spec, obs, TikhonovConfig(alpha=1e-2, gamma_star=_gstar(small_case, 9.0),
                                             max_iters=0))
    np.testing.assert_array_equal(res.gamma_hat, _gstar(small_case, spec.gamma_upper))


def test_feasible_monotone_and_deterministic(small_case):
    spec = small_case.spec
    obs = add_noise(small_case.observation, NoiseSpec(1e-3, 5))
    # the truth trace peaks near 1.07 mid-side, so an upper bound of 1.03 is active
    tight = replace(spec, gamma_upper=1.03)
    cfg = TikhonovConfig(alpha=1e-3, gamma_star=_gstar(small_case, 1.0), max_iters=60)
    a = minimize(tight, obs, cfg, gamma_truth=np.minimum(small_case.gamma_dagger, 1.03))
    b = minimize(tight, obs, cfg, gamma_truth=np.minimum(small_case.gamma_dagger, 1.03))
    assert np.all(a.gamma_hat >= tight.gamma_lower) and np.all(a.gamma_hat <= 1.03)
    assert np.any(a.gamma_hat == 1.03)
    assert all(y <= x for x, y in zip(a.J_history, a.J_history[1:]))
    assert a.J_history == b.J_history
    np.testing.assert_array_equal(a.gamma_hat, b.gamma_hat)


def test_minimizer_quality_bound():
    case = default_case("bump", linear_solver="direct")
    spec = case.spec
    obs = add_noise(case.observation, NoiseSpec(1e-2, 42))
    gs = _gstar(case)
    res = minimize(spec, obs, TikhonovConfig(alpha=1e-2, gamma_star=gs))
    J_true = evaluate_J(spec, case.gamma_dagger, obs, 1e-2, gs)
    assert res.J_final <= J_true + 1e-8 + 1e-3 * J_true
    assert all(y <= x for x, y in zip(res.J_history, res.J_history[1:]))


def test_exact_data_recovery():
    case = default_case("bump", linear_solver="direct")
    spec = case.spec
    cfg = TikhonovConfig(alpha=1e-8, gamma_star=spec.midpoint_gamma(), max_iters=500)
    res = minimize(spec, case.observation, cfg, gamma_truth=case.gamma_dagger)
    rel = res.l2_error_vs_truth / spec.grid.norm_boundary(case.gamma_dagger)
    assert rel <= 0.05


def test_wrong_gradient_is_reported(small_case, monkeypatch):
    spec = small_case.spec
    obs = add_noise(small_case.observation, NoiseSpec(1e-2, 2))
    true_gradient = TikhonovProblem.gradient
    monkeypatch.setattr(TikhonovProblem, "gradient", lambda self, pt: -true_gradient(self, pt))
    with pytest.raises(LineSearchError):
        minimize(spec, obs, TikhonovConfig(alpha=1e-2, gamma_star=_gstar(small_case)))


def test_csv_row():
    res = InversionResult(np.ones(3), [2.0, 1.5], 1, 1.0, 0.5, 0.25, "grad_tol", 0.01, 0.01)
    assert InversionResult.CSV_HEADER == "delta,alpha,iters,J_final,misfit,penalty,l2_error"
    assert res.csv_row() == "0.01,0.01,1,1.5,1.0,0.5,0.25"
    res.l2_error_vs_truth = None
    assert res.csv_row().endswith(",0.5,")
