"""Maxwell system with delayed nonlinear boundary feedback."""

from ._core import (
    AssumptionError,
    ConfigError,
    ContractError,
    Error,
    GeometryError,
    NumericalError,
    appendix_rate,
    echo_config,
    eval_g,
    fit_decay,
    generator_constants,
    monotonicity,
    monotonicity_constants,
    resolvent,
    run_cli,
    simulate,
    two_sided_check,
    xi_default,
)

__all__ = [
    "AssumptionError",
    "ConfigError",
    "ContractError",
    "Error",
    "GeometryError",
    "NumericalError",
    "appendix_rate",
    "echo_config",
    "eval_g",
    "fit_decay",
    "generator_constants",
    "monotonicity",
    "monotonicity_constants",
    "resolvent",
    "run_cli",
    "simulate",
    "two_sided_check",
    "xi_default",
]
