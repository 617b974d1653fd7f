"""Exception hierarchy shared by the simulation, solver and CLI layers."""


class IFMeanFieldError(Exception):
    """Base class for all package errors."""


class ConfigError(IFMeanFieldError, ValueError):
    """Invalid configuration or parameter combination (CLI exit code 2)."""


class DomainError(IFMeanFieldError, ValueError):
    """Argument outside the domain of a mathematical operation."""


class ContractError(IFMeanFieldError, ArithmeticError):
    """A numerical contract was violated (CLI exit code 3)."""


class StepSizeError(ContractError):
    """Time step exceeds the stability bound of the scheme."""


class BudgetError(IFMeanFieldError, ValueError):
    """Problem is larger than the exact solver is allowed to handle."""


class UsageError(IFMeanFieldError, ValueError):
    """Caller passed structurally unusable input (e.g. empty data)."""


class RangeError(IFMeanFieldError, ValueError):
    """Requested time lies outside the available horizon."""
