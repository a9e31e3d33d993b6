"""Order-parameter dynamics of soft committee machines."""

from ._core import (
    Activation,
    BoundaryError,
    BracketError,
    ConfigError,
    DivergenceError,
    DomainError,
    Error,
    Eta2Mode,
    FixedPointError,
    IntegrationError,
    NetConfig,
    NumericalError,
    OrderParameters,
    ParseError,
    SearchError,
    StepDivergenceError,
    Trajectory,
    critical_learning_rate,
    detect_plateau,
    direction_angle_deg,
    eigs,
    find_fixed_point,
    flat_rhs,
    gen_error,
    integrate,
    jacobian,
    load_config,
    moments,
    parse_csv,
    reproduce,
    rhs,
    simulate,
    stability_indicator,
    unflatten,
)

__all__ = [name for name in dir() if not name.startswith("_")]
