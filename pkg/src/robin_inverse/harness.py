"""Synthetic truths, exact-level noise and the noise-level ladder study."""
from __future__ import annotations

import logging
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .forward import NumericalError, Observation, ProblemSpec, solve_forward, window_norm
from .grid import Grid, TimeGrid, build_grid
from .inversion import (InversionResult, TikhonovConfig, choose_alpha, minimize,
                        project_admissible)

log = logging.getLogger(__name__)

RATE_CSV_HEADER = "delta,alpha,l2_error,iterations,J_final"


class InverseCrimeError(ValueError):
    pass


# ---------------------------------------------------------------------------
# truth presets: smooth interior fields whose boundary trace is gamma-dagger

def truth_field(profile: str):
    """Return ``fn(x, y)`` for a named preset.

    ``bump``: 1 + 0.5 exp(-8((x-.5)^2 + (y-.5)^2)); ``linear``: 1 + x + y;
    ``constant c``: the constant c.
    """
    name = profile.strip().lower()
    if name == "bump":
        return lambda x, y: 1.0 + 0.5 * np.exp(-8.0 * ((x - 0.5) ** 2 + (y - 0.5) ** 2))
    if name == "linear":
        return lambda x, y: 1.0 + x + y
    m = re.fullmatch(r"constant[\s_]*([-+0-9.eE]+)", name)
    if m:
        c = float(m.group(1))
        return lambda x, y: np.full(np.shape(x), c)
    raise ValueError(f"unknown truth profile {profile!r} (bump, linear, constant <c>)")


@dataclass(frozen=True)
class Background:
    """Manufactured temperature ``U = base + amp*cos(pi x/Lx) cos(pi y/Ly) exp(-rate t)``.

    Its normal derivative vanishes on every face, so the flux data are
    ``g = gamma_dagger * U`` and the source is ``f = U_t - Laplace U``.
    """

    base: float = 1.0
    amp: float = 0.25
    rate: float = 1.0

    def u(self, grid: Grid, t):
        X, Y = grid.coordinates()
        t = np.asarray(t, dtype=float)[..., None]
        return self.base + self.amp * np.cos(np.pi * X / grid.Lx) * np.cos(np.pi * Y / grid.Ly) \
            * np.exp(-self.rate * t)

    def source(self, grid: Grid, t):
        k2 = np.pi ** 2 * (1.0 / grid.Lx ** 2 + 1.0 / grid.Ly ** 2)
        return (k2 - self.rate) * (self.u(grid, t) - self.base)


def synthetic_spec(grid: Grid, timegrid: TimeGrid, gamma_dagger: np.ndarray,
                   background: Background, **spec_kw) -> ProblemSpec:
    t = timegrid.times
    U = background.u(grid, t)
    f = background.source(grid, t)
    g = gamma_dagger * grid.trace(U)
    return ProblemSpec(grid, timegrid, f, g, U[0], **spec_kw)


@dataclass(frozen=True, eq=False)
class SyntheticCase:
    spec: ProblemSpec               # coarse inversion problem
    gamma_dagger: np.ndarray        # truth on the coarse boundary
    observation: Observation        # clean data, injected from the fine solve
    fine_spec: ProblemSpec
    truth_fn: object = field(repr=False, default=None)
    profile: str = ""


def make_synthetic_case(truth_profile: str, fine_grid: tuple[Grid, TimeGrid],
                        coarse_grid: tuple[Grid, TimeGrid], background: Background | None = None,
                        **spec_kw) -> SyntheticCase:
    """Generate clean window data on ``fine_grid`` and inject them onto ``coarse_grid``.

    Each grid is a ``(Grid, TimeGrid)`` pair. The fine grid must refine the
    coarse one by an integer factor of at least 2 in x, y and time.
    """
    background = background or Background()
    fgrid, ftg = fine_grid
    cgrid, ctg = coarse_grid
    ratios = []
    for nf, nc in ((fgrid.nx - 1, cgrid.nx - 1), (fgrid.ny - 1, cgrid.ny - 1),
                   (ftg.nt, ctg.nt)):
        if nf == nc:
            raise InverseCrimeError("inverse crime: data and inversion grids coincide")
        if nf % nc or nf // nc < 2:
            raise InverseCrimeError(
                f"fine grid must refine the coarse one by an integer factor >= 2 "
                f"(got {nf} vs {nc} intervals)")
        ratios.append(nf // nc)
    if not (math.isclose(fgrid.Lx, cgrid.Lx) and math.isclose(fgrid.Ly, cgrid.Ly)
            and math.isclose(ftg.tau, ctg.tau) and math.isclose(ftg.sigma, ctg.sigma)):
        raise ValueError("fine and coarse grids must cover the same domain and window")
    rx, ry, rt = ratios

    fn = truth_field(truth_profile)
    fine_spec = synthetic_spec(fgrid, ftg, fgrid.evaluate_boundary(fn), background, **spec_kw)
    fine_gamma = fgrid.evaluate_boundary(fn)
    u_fine = solve_forward(fine_spec, fine_gamma)

    # injection: coarse node (i, j) sits at fine node (rx*i, ry*j), coarse step n at rt*n
    ci = np.arange(cgrid.nx) * rx
    cj = np.arange(cgrid.ny) * ry
    fine_ids = (cj[:, None] * fgrid.nx + ci[None, :]).ravel()
    steps = ctg.window_steps * rt
    obs = Observation(u_fine.values[np.ix_(steps, fine_ids)], cgrid, ctg, 0.0)

    gamma_dagger = cgrid.evaluate_boundary(fn)
    spec = synthetic_spec(cgrid, ctg, gamma_dagger, background, **spec_kw)
    return SyntheticCase(spec, gamma_dagger, obs, fine_spec, fn, truth_profile)


def default_case(truth_profile: str = "bump", Lx=1.0, Ly=1.0, nx=33, ny=33, nt=64,
                 tau=1.0, sigma=0.25, fine_factor=2, background: Background | None = None,
                 **spec_kw) -> SyntheticCase:
    coarse = (build_grid(Lx, Ly, nx, ny), TimeGrid(tau, nt, sigma))
    fine = (build_grid(Lx, Ly, fine_factor * (nx - 1) + 1, fine_factor * (ny - 1) + 1),
            TimeGrid(tau, fine_factor * nt, sigma))
    return make_synthetic_case(truth_profile, fine, coarse, background, **spec_kw)


# ---------------------------------------------------------------------------
# noise

@dataclass(frozen=True)
class NoiseSpec:
    delta: float
    seed: int = 42

    def __post_init__(self):
        if self.delta < 0:
            raise ValueError(f"noise level must be >= 0, got {self.delta}")


def add_noise(observation: Observation, noise: NoiseSpec) -> Observation:
    """Perturb by seeded Gaussian samples rescaled to window norm exactly ``delta``."""
    if noise.delta == 0:
        return observation.with_values(observation.values, 0.0)
    rng = np.random.default_rng(noise.seed)
    eta = rng.standard_normal(observation.values.shape)
    eta *= noise.delta / window_norm(observation.grid, observation.timegrid, eta)
    return observation.with_values(observation.values + eta, noise.delta)


# ---------------------------------------------------------------------------
# rate study

def fit_slope(points) -> tuple[float, float]:
    """Least-squares line through ``(log x, log y)``; returns ``(slope, intercept)``."""
    pts = np.asarray(list(points), dtype=float)
    if pts.ndim != 2 or pts.shape[0] < 2 or pts.shape[1] != 2:
        raise ValueError("need at least two (x, y) pairs")
    if np.any(pts <= 0) or not np.all(np.isfinite(pts)):
        raise ValueError("slope fit needs positive finite values")
    lx, ly = np.log(pts[:, 0]), np.log(pts[:, 1])
    slope, intercept = np.polyfit(lx, ly, 1)
    return float(slope), float(intercept)


@dataclass
class RateStudyReport:
    rows: list[tuple[float, float, float, int, float]]
    fitted_slope: float
    fitted_intercept: float
    config_echo: dict
    results: list[InversionResult] = field(default_factory=list, repr=False)

    @property
    def deltas(self) -> np.ndarray:
        return np.array([r[0] for r in self.rows])

    @property
    def errors(self) -> np.ndarray:
        return np.array([r[2] for r in self.rows])

    def to_csv(self) -> str:
        lines = [RATE_CSV_HEADER]
        for delta, alpha, err, iters, J in self.rows:
            lines.append(f"{float(delta)!r},{float(alpha)!r},{float(err)!r},{int(iters)},{float(J)!r}")
        return "\n".join(lines) + "\n"

    def write(self, out_dir, stem: str = "rate") -> tuple[Path, Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        csv_path = out / f"{stem}.csv"
        csv_path.write_text(self.to_csv())
        plot_path = out / f"{stem}.gp"
        plot_path.write_text(gnuplot_script(csv_path.name, self.fitted_slope,
                                            self.fitted_intercept))
        return csv_path, plot_path


def gnuplot_script(csv_name: str, slope: float, intercept: float) -> str:
    return (
        "set datafile separator ','\n"
        "set logscale xy\n"
        "set xlabel 'noise level delta'\n"
        "set ylabel 'L2 boundary error'\n"
        "set key top left\n"
        f"fit_line(x) = exp({intercept!r}) * x**({slope!r})\n"
        f"ref(x) = exp({intercept!r}) * x**0.5\n"
        f"plot '{csv_name}' using 1:3 skip 1 with linespoints title 'error', \\\n"
        f"     fit_line(x) title sprintf('fit slope %.3f', {slope!r}), \\\n"
        "     ref(x) dashtype 2 title 'slope 1/2'\n"
    )


def rate_study(case: SyntheticCase, deltas, c_alpha: float = 1.0, seed: int = 42,
               gamma_star: np.ndarray | None = None, max_iters: int = 500,
               grad_tol: float = 1e-9, config_echo: dict | None = None) -> RateStudyReport:
    deltas = [float(d) for d in deltas]
    if len(deltas) < 4:
        raise ValueError("rate study needs at least 4 noise levels")
    if any(a <= b for a, b in zip(deltas, deltas[1:])):
        raise ValueError("noise levels must be strictly decreasing")
    if min(deltas) <= 0 or max(deltas) / min(deltas) < 100 * (1 - 1e-12):
        raise ValueError("noise levels must be positive and span at least two decades")

    spec = case.spec
    if gamma_star is None:
        gamma_star = spec.midpoint_gamma()
    gamma_star = np.asarray(gamma_star, dtype=float)

    rows, results = [], []
    for k, delta in enumerate(deltas):
        obs = add_noise(case.observation, NoiseSpec(delta, seed + k))
        alpha = choose_alpha(delta, c_alpha)
        cfg = TikhonovConfig(alpha=alpha, gamma_star=gamma_star,
                             gamma_init=project_admissible(gamma_star, spec.gamma_lower,
                                                           spec.gamma_upper),
                             max_iters=max_iters, grad_tol=grad_tol)
        try:
            res = minimize(spec, obs, cfg, gamma_truth=case.gamma_dagger)
        except (NumericalError, ValueError) as exc:
            exc.args = (f"inversion failed at delta={delta!r}: {exc}",) + exc.args[1:]
            raise
        log.info("delta=%g alpha=%g err=%.4e iters=%d (%s)", delta, alpha,
                 res.l2_error_vs_truth, res.iterations, res.stop_reason)
        rows.append((delta, alpha, res.l2_error_vs_truth, res.iterations, res.J_final))
        results.append(res)

    slope, intercept = fit_slope([(r[0], r[2]) for r in rows])
    echo = dict(config_echo or {})
    echo.update(deltas=deltas, c_alpha=c_alpha, seed=seed)
    return RateStudyReport(rows, slope, intercept, echo, results)
