"""Exceptions raised by jcdyn"""


class JcdynError(Exception):
    """Base class for all jcdyn errors"""


class ConfigError(JcdynError, ValueError):
    """Invalid run configuration; `field` names the offending entry"""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field
        self.message = message

    def __reduce__(self):
        return type(self), (self.field, self.message)


class SolverError(JcdynError, RuntimeError):
    """A numerical routine could not produce a result"""

    def __init__(self, message: str, context: dict | None = None):
        super().__init__(message)
        self.context = context or {}

    # keeps the context when raised inside a worker process
    def __reduce__(self):
        return type(self), (str(self), self.context)


class DegenerateSteadyStateError(SolverError):
    pass


class NoCrossingError(SolverError):
    pass


class NoPeaksError(SolverError):
    pass


class FitError(SolverError):
    pass


class DefectiveEigenbasisError(SolverError):
    pass


class LabelAmbiguityError(SolverError):
    pass
