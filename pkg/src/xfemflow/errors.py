"""Exception hierarchy shared by all modules."""


class XfemError(Exception):
    """Base class for every error raised by the package."""


class GeometryError(XfemError):
    pass


class DomainError(XfemError):
    """Input outside the admissible range of an operation."""


class ConformityError(XfemError):
    pass


class MeshParseError(XfemError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class MeshValidationError(XfemError):
    pass


class MappingError(XfemError):
    pass


class SingularEvaluationError(XfemError):
    pass


class ConfigError(XfemError):
    pass


class QuadratureAccuracyError(XfemError):
    """Adaptive quadrature hit its level cap before meeting the tolerance."""

    def __init__(self, message, estimate=None, error_bound=None):
        super().__init__(message)
        self.estimate = estimate
        self.error_bound = error_bound


class AssemblyError(XfemError):
    pass


class SolverRankError(XfemError):
    pass


class SignConventionError(XfemError):
    pass


class NumericError(XfemError):
    pass
