"""Exception hierarchy shared by every module."""


class LegendreError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(LegendreError, ValueError):
    """Argument lies outside the (open) domain of a function."""


class OrderError(LegendreError, ValueError):
    """Requested derivative order is not available."""


class NotStrictlyConvex(LegendreError, ValueError):
    pass


class NoStationaryPoint(LegendreError, ValueError):
    """``f'(t) = s`` has no root inside the domain."""


class UnsupportedKind(LegendreError, ValueError):
    pass


class DimensionError(LegendreError, ValueError):
    pass


class UnboundedBelow(LegendreError):
    """Lagrangian (or merit function) is unbounded below."""


class UnboundedMerit(UnboundedBelow):
    pass


class UnknownProblem(LegendreError, KeyError):
    pass


class SingularHessian(LegendreError, ArithmeticError):
    pass


class DomainViolation(LegendreError):
    """A Newton step left the domain of a supposedly self-concordant oracle."""


class MaxIterations(LegendreError, RuntimeError):
    pass


class RadiusTooLarge(LegendreError, ValueError):
    pass


class InfeasibleStart(LegendreError, ValueError):
    pass


class StepGuardExhausted(LegendreError, RuntimeError):
    pass


class NotInLatePhase(LegendreError):
    pass


class ConfigError(LegendreError, ValueError):
    pass


class LengthMismatch(LegendreError, ValueError):
    pass
