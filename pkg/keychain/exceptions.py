class KeychainException(Exception):
    pass


class ValidationError(KeychainException):
    """Malformed instance, policy or argument. The CLI maps it to exit status 2."""


class AdmissibilityError(ValidationError):

    def __init__(self, message, scenario=None, key=None, info_sets=()):
        super().__init__(message)
        self.scenario = scenario
        self.key = key
        self.info_sets = tuple(info_sets)


class LaminarityError(ValidationError):

    def __init__(self, message, pair=None):
        super().__init__(message)
        self.pair = pair


class SolverError(KeychainException):
    """A solver could not produce a certified answer. The CLI maps it to exit status 3."""


class SizeGuardError(SolverError):

    def __init__(self, message, bounds=None):
        super().__init__(message)
        self.bounds = dict(bounds or {})


class SolverStallError(SolverError):
    pass


class UnboundedError(SolverError):
    pass


class InfeasibleError(SolverError):
    pass


class ConvergenceError(SolverError):

    def __init__(self, message, gap=None):
        super().__init__(message)
        self.gap = gap


class SamplerError(SolverError):
    pass
