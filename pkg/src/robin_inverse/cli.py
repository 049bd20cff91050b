"""Command-line driver.

Exit codes: 0 success, 2 configuration or usage error, 3 numerical failure,
4 violated precondition of the data or the setup.
"""
from __future__ import annotations

import argparse
import logging
import math
import sys
import time
from pathlib import Path

import numpy as np

from .config import ConfigError, RunConfig, load_config
from .direct import DenominatorError, amplification_study
from .forward import (AdmissibilityError, NumericalError, save_field_csv, solve_forward,
                      window_norm)
from .grid import TimeGrid, build_grid
from .harness import (Background, InverseCrimeError, NoiseSpec, add_noise, default_case,
                      rate_study, synthetic_spec, truth_field)
from .inversion import (TikhonovConfig, choose_alpha, gradient_check, minimize,
                        project_admissible)
from .source import SourceConditionError, construct_psi

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_PRECONDITION = 0, 2, 3, 4
GRAD_CHECK_TOL = 1e-6
SOURCE_TOL = 1e-8


def _background(cfg: RunConfig) -> Background:
    return Background(cfg.bg_base, cfg.bg_amp, cfg.bg_rate)


def _spec_kw(cfg: RunConfig) -> dict:
    return dict(gamma_lower=cfg.gamma_lower, gamma_upper=cfg.gamma_upper, theta=cfg.theta,
                cg_tol=cfg.cg_tol, jacobi=cfg.jacobi, linear_solver=cfg.linear_solver)


def build_case(cfg: RunConfig):
    try:
        truth_field(cfg.truth_profile)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return default_case(cfg.truth_profile, cfg.Lx, cfg.Ly, cfg.nx, cfg.ny, cfg.nt, cfg.tau,
                        cfg.sigma, cfg.fine_factor, _background(cfg), **_spec_kw(cfg))


def _gamma_star(cfg: RunConfig, n: int) -> np.ndarray:
    return np.full(n, cfg.gamma_star_const)


def _boundary_table(grid, columns: dict) -> str:
    xb, yb = grid.boundary_coordinates()
    names = ["x", "y", *columns]
    lines = [",".join(names)]
    cols = [xb, yb, *columns.values()]
    for row in zip(*cols):
        lines.append(",".join(repr(float(v)) for v in row))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# subcommands; each returns an exit code

def cmd_forward(cfg: RunConfig, out: Path) -> int:
    case = build_case(cfg)
    spec = case.spec
    u = solve_forward(spec, case.gamma_dagger)
    save_field_csv(u, out / "u.csv")
    window = u.values[spec.timegrid.window_start:]
    print(f"forward: {spec.grid.nx}x{spec.grid.ny} nodes, {spec.timegrid.nt} steps, "
          f"max|u| = {np.abs(u.values).max():.6e}, "
          f"window norm = {window_norm(spec.grid, spec.timegrid, window):.6e}")
    print(f"wrote {out / 'u.csv'}")
    return EXIT_OK


def cmd_invert(cfg: RunConfig, out: Path) -> int:
    case = build_case(cfg)
    spec = case.spec
    obs = add_noise(case.observation, NoiseSpec(cfg.delta, cfg.seed))
    gstar = _gamma_star(cfg, len(spec.grid.boundary))
    alpha = choose_alpha(cfg.delta, cfg.c_alpha)
    tcfg = TikhonovConfig(alpha=alpha, gamma_star=gstar,
                          gamma_init=project_admissible(gstar, cfg.gamma_lower, cfg.gamma_upper),
                          max_iters=cfg.max_iters, grad_tol=cfg.grad_tol)
    res = minimize(spec, obs, tcfg, gamma_truth=case.gamma_dagger)
    (out / "inversion.csv").write_text(res.CSV_HEADER + "\n" + res.csv_row() + "\n")
    (out / "gamma_hat.csv").write_text(_boundary_table(
        spec.grid, {"gamma_hat": res.gamma_hat, "gamma_true": case.gamma_dagger}))
    print(f"invert: delta={cfg.delta:g} alpha={alpha:g} iterations={res.iterations} "
          f"({res.stop_reason}) J={res.J_final:.6e} l2_error={res.l2_error_vs_truth:.6e}")
    return EXIT_OK


def cmd_direct(cfg: RunConfig, out: Path) -> int:
    table = amplification_study(cfg.truth_profile, cfg.delta, cfg.grids, seed=cfg.seed,
                                Lx=cfg.Lx, Ly=cfg.Ly, tau=cfg.tau, sigma=cfg.sigma,
                                fine_factor=cfg.fine_factor, background=_background(cfg),
                                **_spec_kw(cfg))
    table.write(out / "direct.csv")
    print(f"{'h':>12} {'err_clean':>12} {'err_noisy':>12}")
    for h, a, b in table.rows:
        print(f"{h:12.5g} {a:12.4e} {b:12.4e}")
    print(f"clean errors decreasing: {table.clean_decreasing}; "
          f"noisy error growing: {table.noisy_growing}")
    return EXIT_OK


def cmd_rate_study(cfg: RunConfig, out: Path) -> int:
    case = build_case(cfg)
    gstar = _gamma_star(cfg, len(case.spec.grid.boundary))
    t0 = time.perf_counter()
    report = rate_study(case, cfg.deltas, c_alpha=cfg.c_alpha, seed=cfg.seed, gamma_star=gstar,
                        max_iters=cfg.max_iters, grad_tol=cfg.grad_tol,
                        config_echo=cfg.as_dict())
    csv_path, gp_path = report.write(out)
    for delta, alpha, err, iters, _ in report.rows:
        print(f"delta={delta:<8g} alpha={alpha:<8g} l2_error={err:.4e} iterations={iters}")
    print(f"fitted slope = {report.fitted_slope:.4f} "
          f"({time.perf_counter() - t0:.1f} s); wrote {csv_path} and {gp_path}")
    return EXIT_OK


def cmd_grad_check(cfg: RunConfig, out: Path) -> int:
    case = build_case(cfg)
    spec = case.spec
    obs = add_noise(case.observation, NoiseSpec(cfg.delta, cfg.seed))
    gstar = _gamma_star(cfg, len(spec.grid.boundary))
    # halfway between prior and truth keeps both misfit and penalty terms active
    gamma = project_admissible(0.5 * (gstar + case.gamma_dagger), cfg.gamma_lower,
                               cfg.gamma_upper)
    chk = gradient_check(spec, obs, gamma, choose_alpha(cfg.delta, cfg.c_alpha), gstar,
                         cfg.grad_directions, cfg.grad_eps, cfg.seed)
    lines = ["direction,adjoint,finite_diff,rel_error"]
    for k, (a, f, r) in enumerate(zip(chk.adjoint, chk.finite_diff, chk.rel_errors)):
        lines.append(f"{k},{float(a)!r},{float(f)!r},{float(r)!r}")
    (out / "grad_check.csv").write_text("\n".join(lines) + "\n")
    ok = chk.max_rel_error <= GRAD_CHECK_TOL
    print(f"max relative error = {chk.max_rel_error:.3e} "
          f"({'ok' if ok else 'FAILED'}, tolerance {GRAD_CHECK_TOL:g})")
    return EXIT_OK if ok else EXIT_NUMERICAL


def cmd_verify_source(cfg: RunConfig, out: Path) -> int:
    ratio = cfg.tau / cfg.sigma
    nt = cfg.nt_window * ratio
    if not math.isclose(nt, round(nt), rel_tol=0, abs_tol=1e-9):
        raise ConfigError(f"nt_window * tau / sigma = {nt} is not an integer")
    grid = build_grid(cfg.Lx, cfg.Ly, cfg.nx, cfg.ny)
    tg = TimeGrid(cfg.tau, int(round(nt)), cfg.sigma)
    fn = truth_field(cfg.truth_profile)
    gamma_dagger = grid.evaluate_boundary(fn)
    spec = synthetic_spec(grid, tg, gamma_dagger, _background(cfg), **_spec_kw(cfg))
    u = solve_forward(spec, gamma_dagger)
    cert = construct_psi(u, grid.evaluate(fn), cfg.gamma_star_const)
    cert.write(out / "certificate.csv")
    ok = cert.residual_rel <= SOURCE_TOL
    print(f"source residual = {cert.residual_rel:.3e}, min |u1| = {cert.u1_min_abs:.3e}, "
          f"window steps = {cert.nt_window} ({'ok' if ok else 'FAILED'})")
    return EXIT_OK if ok else EXIT_NUMERICAL


COMMANDS = {
    "forward": (cmd_forward, "solve the forward problem at the true coefficient"),
    "invert": (cmd_invert, "Tikhonov inversion at a single noise level"),
    "direct": (cmd_direct, "closed-form recovery and its noise amplification"),
    "rate-study": (cmd_rate_study, "error versus noise level and fitted slope"),
    "grad-check": (cmd_grad_check, "adjoint gradient against finite differences"),
    "verify-source": (cmd_verify_source, "construct and check the source representer"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="robin-inverse",
        description="Robin coefficient identification from terminal-window temperatures.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", required=True)
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text, description=help_text)
        p.add_argument("--config", type=Path, help="flat 'key = value' file")
        p.add_argument("--out", type=Path, default=Path("out"), help="output directory")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    func = COMMANDS[args.command][0]
    try:
        cfg = load_config(args.config) if args.config is not None else RunConfig()
        args.out.mkdir(parents=True, exist_ok=True)
        (args.out / "config_resolved.txt").write_text(cfg.resolved_text())
        return func(cfg, args.out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (DenominatorError, SourceConditionError, AdmissibilityError,
            InverseCrimeError) as exc:
        print(f"precondition violated: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION
    except ValueError as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
