"""Robin coefficient identification for the heat equation from terminal-window data."""
from .config import ConfigError, RunConfig, load_config, parse_config
from .direct import (AmplificationTable, DenominatorError, amplification_study,
                     direct_recover, normal_derivative)
from .forward import (AdmissibilityError, NumericalError, Observation, ProblemSpec,
                      SpaceTimeField, assemble_step_operator, load_field_csv,
                      restrict_to_window, save_field_csv, solve_forward, window_norm)
from .grid import Grid, GridError, TimeGrid, build_grid, inner_product_boundary, \
    inner_product_interior
from .harness import (Background, InverseCrimeError, NoiseSpec, RateStudyReport, add_noise,
                      default_case, fit_slope, make_synthetic_case, rate_study)
from .inversion import (InversionResult, LineSearchError, TikhonovConfig, choose_alpha,
                        evaluate_J, gradient_check, minimize, project_admissible)
from .sensitivity import gradient_J, solve_adjoint, solve_sensitivity
from .source import SourceCertificate, SourceConditionError, construct_psi, \
    verify_source_condition

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "RunConfig",
    "load_config",
    "parse_config",
    "AmplificationTable",
    "DenominatorError",
    "amplification_study",
    "direct_recover",
    "normal_derivative",
    "AdmissibilityError",
    "NumericalError",
    "Observation",
    "ProblemSpec",
    "SpaceTimeField",
    "assemble_step_operator",
    "load_field_csv",
    "restrict_to_window",
    "save_field_csv",
    "solve_forward",
    "window_norm",
    "Grid",
    "GridError",
    "TimeGrid",
    "build_grid",
    "inner_product_boundary",
    "inner_product_interior",
    "Background",
    "InverseCrimeError",
    "NoiseSpec",
    "RateStudyReport",
    "add_noise",
    "default_case",
    "fit_slope",
    "make_synthetic_case",
    "rate_study",
    "InversionResult",
    "LineSearchError",
    "TikhonovConfig",
    "choose_alpha",
    "evaluate_J",
    "gradient_check",
    "minimize",
    "project_admissible",
    "gradient_J",
    "solve_adjoint",
    "solve_sensitivity",
    "SourceCertificate",
    "SourceConditionError",
    "construct_psi",
    "verify_source_condition",
]
