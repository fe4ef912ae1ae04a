"""Exception hierarchy shared across the package."""


class ImpzoneError(Exception):
    """Base class for all package errors."""


class SpectrumError(ImpzoneError):
    pass


class ComplexSpectrum(SpectrumError):
    pass


class RepeatedEigenvalue(SpectrumError):
    pass


class NonRationalEigenvalue(SpectrumError):
    pass


class IllConditionedEigenbasis(SpectrumError):
    pass


class SolverFailure(ImpzoneError):
    """The numerical backend returned a status that is neither a solution nor a certificate."""

    def __init__(self, message, status=None):
        super().__init__(message)
        self.status = status


class InfeasibleProblem(ImpzoneError):
    """An optimization problem was certified infeasible.

    ``trajectory`` is set by the closed-loop simulator to the partial run.
    """

    def __init__(self, message, trajectory=None):
        super().__init__(message)
        self.trajectory = trajectory


class SingularMap(ImpzoneError):
    pass


class UnsupportedDimension(ImpzoneError):
    pass


class EmptyPolytope(ImpzoneError):
    pass


class UnboundedPolytope(ImpzoneError):
    pass


class DegenerateHull(ImpzoneError):
    pass


class NoConvergence(ImpzoneError):
    """Set recursion hit its iteration cap; ``last`` holds the final iterate."""

    def __init__(self, message, last=None, iterations=None):
        super().__init__(message)
        self.last = last
        self.iterations = iterations


class EmptyResult(ImpzoneError):
    """Set recursion emptied out."""

    def __init__(self, message, iterations=None):
        super().__init__(message)
        self.iterations = iterations


class SingularEquilibriumMap(ImpzoneError):
    pass


class ConfigError(ImpzoneError):
    pass
