# nested_covar/errors.py
"""
Exception hierarchy shared by the library and the CLI.

Every error carries the process exit code the CLI should use when it
escapes a command: 2 for configuration and domain errors, 3 for runtime
estimation failures.
"""
from typing import Any, List, Optional

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3
EXIT_UNKNOWN_FLAG = 4


class CovarError(Exception):
    """Base error for the nested CoVaR engine"""
    exit_code = EXIT_RUNTIME


class ConfigError(CovarError):
    """Invalid or unknown configuration key"""
    exit_code = EXIT_CONFIG

    def __init__(self, message: str, key: Optional[str] = None):
        super().__init__(message)
        self.key = key


class DomainError(CovarError):
    """Input outside the mathematical domain of an operation"""
    exit_code = EXIT_CONFIG


class KnockedOut(DomainError):
    """Barrier already breached; the option is worth zero by convention"""

    price = 0.0


class NotPositiveDefinite(DomainError):
    """Covariance matrix failed the Cholesky pivot test"""

    def __init__(self, message: str, pivot_index: int):
        super().__init__(message)
        self.pivot_index = pivot_index


class DimensionMismatch(DomainError):
    pass


class ShapeMismatch(DomainError):
    pass


class EmptyInput(DomainError):
    pass


class InfeasibleBudget(DomainError):
    pass


class MismatchedScenario(CovarError):
    """Inner path bundle does not descend from the given scenario"""


class IntegrationFailure(CovarError):
    pass


class RankDeficient(CovarError):
    """Design matrix is not of full column rank"""

    def __init__(self, message: str, column: int):
        super().__init__(message)
        self.column = column


class FactorizationFailure(CovarError):
    """(K + m*lambda*I) is numerically not positive definite"""


class Diverged(CovarError):
    """Training loss became non-finite"""


class BudgetExhausted(CovarError):
    """Tuning stopped at its wall-clock cap; carries the best candidate so far"""

    def __init__(self, message: str, best: Any, table: List[Any]):
        super().__init__(message)
        self.best = best
        self.table = table


class VersionMismatch(CovarError):
    exit_code = EXIT_CONFIG


class CorruptArtifact(CovarError):
    exit_code = EXIT_CONFIG


class PrecisionUnreachable(CovarError):
    pass


class InsufficientPoints(CovarError):
    pass


class ResultsIOError(CovarError):
    pass


class EmptyNeighborhood(UserWarning):
    """All kernel weights underflowed at an evaluation point; nearest target used"""
