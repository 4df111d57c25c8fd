"""Exception hierarchy shared by every layer of the toolkit."""


class GeometryError(Exception):
    """Base class for all toolkit errors."""


# chart layer
class PointOutsideDomain(GeometryError):
    pass


class NoTransitionPath(GeometryError):
    pass


class NotInOverlap(GeometryError):
    pass


class Degenerate(GeometryError):
    """A metric (or restricted metric) has a near-zero eigenvalue."""


class SignatureMismatch(GeometryError):
    pass


# bundle layer
class PhiNotInvertibleOnFiber(GeometryError):
    pass


class NoTrivialization(GeometryError):
    pass


class DegenerateFiberMetric(Degenerate):
    pass


class AtlasInconsistent(GeometryError):
    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness


class NonHausdorffQuotient(GeometryError):
    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness


# physics layer
class FiberTangentDegenerate(GeometryError):
    pass


class FlowNotPeriodic(GeometryError):
    pass


class NotFluidForm(GeometryError):
    pass


class NonUniqueEigenspace(GeometryError):
    pass


class LeftAllCharts(GeometryError):
    pass


class TangentMapSingular(GeometryError):
    pass


class FiberMetricNotPositive(GeometryError):
    pass


class NotRoundSphere(GeometryError):
    pass


# harness
class ParseError(GeometryError):
    def __init__(self, message, position=None, token=None):
        if position is not None:
            message = f"{message} (at position {position})"
        super().__init__(message)
        self.position = position
        self.token = token


class ValidationError(GeometryError):
    def __init__(self, message, invariant=None):
        super().__init__(message)
        self.invariant = invariant
