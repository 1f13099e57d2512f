"""Exception types shared across the package."""

from __future__ import annotations


class SpectralabError(Exception):
    """Base class for all operational failures."""


class SingularMatrix(SpectralabError):
    def __init__(self, message, min_pivot=None, index=None):
        super().__init__(message)
        self.min_pivot = min_pivot
        self.index = index


class NotHermitian(SpectralabError):
    pass


class NoConvergence(SpectralabError):
    def __init__(self, message, dim=None, residual=None):
        super().__init__(message)
        self.dim = dim
        self.residual = residual


class InvalidConfig(SpectralabError):
    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field


class NonHermitianInput(SpectralabError):
    pass


class CouplingResonanceHit(SpectralabError):
    """I + s*J*T_z(H0) is numerically singular: s sits (near) a resonance point."""


class BoundaryZero(SpectralabError):
    """The determinant vanishes (or its phase is unresolvable) on a contour."""


class NewtonStall(SpectralabError):
    pass


class ContourCrossesPole(SpectralabError):
    pass


class QuadratureNoConvergence(SpectralabError):
    def __init__(self, message, achieved=None):
        super().__init__(message)
        self.achieved = achieved


class EvaluationAtPole(SpectralabError):
    pass


class MissingTrajectoryData(SpectralabError):
    pass


class BudgetExceeded(SpectralabError):
    def __init__(self, message, needed=None):
        super().__init__(message)
        self.needed = needed


class UnstableCount(SpectralabError):
    pass
