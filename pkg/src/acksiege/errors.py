"""Exception hierarchy. The CLI maps these onto exit codes."""


class AckSiegeError(Exception):
    """Base class for all package errors."""


class ModelError(AckSiegeError):
    """Invalid system model (shape, definiteness, observability, ...)."""


class BudgetError(AckSiegeError):
    """Invalid or infeasible energy budget."""


class SolverError(AckSiegeError):
    """An iterative solver failed to converge or a series diverges."""


class CalibrationError(AckSiegeError):
    """Detector calibration cannot meet the requested energy budget."""


class AnalysisError(AckSiegeError):
    """A chain or threshold computation failed."""


class ConfigError(AckSiegeError):
    """Malformed or schema-violating configuration input."""
