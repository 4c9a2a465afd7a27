"""Exception types shared across the package."""


class MoboError(Exception):
    """Base class for all package errors."""


class ContractError(MoboError, ValueError):
    """An argument violates a documented precondition (shape, length, sign)."""


class NumericalError(MoboError, RuntimeError):
    """A numerical routine failed (e.g. factorization at maximum jitter)."""


class ConfigError(MoboError, ValueError):
    """An experiment configuration or weight specification is invalid."""


class ObjectiveError(MoboError, RuntimeError):
    """Evaluating a black-box objective failed."""


class LogError(MoboError, ValueError):
    """An evaluation log is malformed or inconsistent with its config."""


class NoOracleError(ContractError):
    """Regret was requested for an objective without a known true function."""
