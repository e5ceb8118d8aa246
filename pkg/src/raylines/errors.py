"""Exception hierarchy shared by every module.

Numerical failures (a ray leaving the domain of a map) derive from
``RayDomainError`` so callers can separate them from bad input.
"""


class RaylinesError(Exception):
    pass


class ZeroDirectionError(RaylinesError, ValueError):
    pass


class InvalidTangentError(RaylinesError, ValueError):
    pass


class OutOfChartError(RaylinesError, ValueError):
    pass


class DegenerateGradientError(RaylinesError, ValueError):
    pass


class RayDomainError(RaylinesError):
    """A ray fell outside the domain of an optical map."""

    def __init__(self, message, interface=None, location=None):
        super().__init__(message)
        self.interface = interface
        self.location = location


class MissError(RayDomainError):
    pass


class GrazingError(RayDomainError):
    pass


class TotalInternalReflection(RayDomainError):
    pass


class DifferentialUndefined(RayDomainError):
    pass


class TraceFailure(RayDomainError):
    pass


class FamilyError(RaylinesError, ValueError):
    pass


class RankDeficientError(FamilyError):
    def __init__(self, message, location=None):
        super().__init__(message)
        self.location = location


class NonNormalFamilyError(FamilyError):
    pass


class SamplingExhausted(RaylinesError):
    pass


class SceneError(RaylinesError):
    """Invalid scene file. ``tag`` distinguishes the failure category."""

    tag = "E-SCENE"

    def __init__(self, message, where=None):
        if where:
            message = f"{where}: {message}"
        super().__init__(message)
        self.where = where


class SceneParseError(SceneError):
    tag = "E-PARSE"


class UnknownKindError(SceneError):
    tag = "E-KIND"


class DanglingReferenceError(SceneError):
    tag = "E-REF"


class SceneInvariantError(SceneError):
    tag = "E-INVARIANT"
