"""Flat ``key = value`` run configuration with ``#`` comments."""
from __future__ import annotations

from dataclasses import dataclass, fields
from pathlib import Path


class ConfigError(ValueError):
    pass


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in text.split(",") if v.strip())


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(v) for v in text.split(",") if v.strip())


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


@dataclass
class RunConfig:
    Lx: float = 1.0
    Ly: float = 1.0
    nx: int = 33
    ny: int = 33
    nt: int = 64
    tau: float = 1.0
    sigma: float = 0.25
    theta: float = 1.0
    gamma_lower: float = 0.5
    gamma_upper: float = 5.0
    gamma_star_const: float = 1.5
    truth_profile: str = "bump"
    fine_factor: int = 2
    c_alpha: float = 1.0
    deltas: tuple = (1e-1, 3e-2, 1e-2, 3e-3, 1e-3)
    seed: int = 42
    max_iters: int = 500
    grad_tol: float = 1e-9
    cg_tol: float = 1e-12
    # not part of the core key set; used by single-run subcommands
    delta: float = 1e-2
    linear_solver: str = "cg"
    jacobi: bool = False
    bg_base: float = 1.0
    bg_amp: float = 0.25
    bg_rate: float = 1.0
    grids: tuple = (16, 32, 64)
    nt_window: int = 256
    grad_eps: float = 1e-5
    grad_directions: int = 5

    def resolved_text(self) -> str:
        lines = []
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, tuple):
                v = ",".join(repr(x) for x in v)
            elif isinstance(v, float):
                v = repr(v)
            lines.append(f"{f.name} = {v}")
        return "\n".join(lines) + "\n"

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


_PARSERS = {float: float, int: int, str: str.strip, bool: _bool}


def _parser_for(name: str, default):
    if name == "deltas":
        return _floats
    if name == "grids":
        return _ints
    return _PARSERS[type(default)]


def parse_config(text: str, source: str = "<config>") -> RunConfig:
    cfg = RunConfig()
    known = {f.name for f in fields(cfg)}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in known:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        try:
            setattr(cfg, key, _parser_for(key, getattr(RunConfig, key))(value))
        except ValueError as exc:
            raise ConfigError(f"{source}:{lineno}: bad value for {key}: {exc}") from None
    _validate(cfg, source)
    return cfg


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {str(path)!r}: {exc.strerror}") from None
    return parse_config(text, str(path))


def _validate(cfg: RunConfig, source: str):
    problems = []
    if cfg.nx < 3 or cfg.ny < 3:
        problems.append("nx and ny must be >= 3")
    if cfg.nt < 1:
        problems.append("nt must be >= 1")
    if not 0 < cfg.sigma <= cfg.tau:
        problems.append("need 0 < sigma <= tau")
    if cfg.theta not in (0.5, 1.0):
        problems.append("theta must be 1 or 0.5")
    if not 0 < cfg.gamma_lower <= cfg.gamma_upper:
        problems.append("need 0 < gamma_lower <= gamma_upper")
    if cfg.linear_solver not in ("cg", "direct"):
        problems.append("linear_solver must be 'cg' or 'direct'")
    if cfg.fine_factor < 2:
        problems.append("fine_factor must be >= 2")
    if cfg.c_alpha <= 0:
        problems.append("c_alpha must be positive")
    if cfg.delta < 0 or any(d <= 0 for d in cfg.deltas):
        problems.append("noise levels must be positive (delta may be 0)")
    if problems:
        raise ConfigError(f"{source}: " + "; ".join(problems))
