"""Exception hierarchy shared by all modules."""


class CayleyQAError(Exception):
    """Base class; ``code`` is the machine-readable name used by the CLI."""

    @property
    def code(self) -> str:
        return type(self).__name__


class Unsupported(CayleyQAError):
    pass


class PlanarInfeasible(CayleyQAError):
    pass


class CoincidentAtoms(CayleyQAError):
    pass


class DimensionMismatch(CayleyQAError):
    pass


class TooLarge(CayleyQAError):
    pass


class ConvergenceFailure(CayleyQAError):
    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class StepControlFailure(CayleyQAError):
    pass


class PositivityViolation(CayleyQAError):
    pass


class NotNormalized(CayleyQAError):
    pass


class DoubleApplication(CayleyQAError):
    pass


class DegenerateTargets(CayleyQAError):
    pass


class ConfigError(CayleyQAError):
    pass
