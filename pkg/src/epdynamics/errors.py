"""Exception and warning types raised across the package."""


class EPDynamicsError(Exception):
    """Base class for all package errors."""


class InvalidConfig(EPDynamicsError, ValueError):
    """A path or run configuration failed validation."""

    def __init__(self, message, field=None):
        self.field = field
        if field is not None:
            message = f"{field}: {message}"
        super().__init__(message)


class AtExceptionalPoint(EPDynamicsError):
    """Eigenvalues coalesce: the eigenbasis and coupling are undefined."""


class TangentCrossing(EPDynamicsError):
    """Im(lambda) touches zero with vanishing slope."""

    def __init__(self, t):
        self.t = t
        super().__init__(f"degenerate critical time near t={t:.6g}")


class StepSizeUnderflow(EPDynamicsError):
    """Adaptive step size collapsed below machine resolution."""

    def __init__(self, t):
        self.t = t
        super().__init__(f"step size underflow at t={t!r}")


class IntegrationOverflow(EPDynamicsError):
    """State magnitude exceeded the representable range."""

    def __init__(self, t):
        self.t = t
        super().__init__(f"state overflow at t={t!r}; enable renormalization")


class GlobalFactorOverflow(EPDynamicsError):
    """Exponent of the common amplitude factor is too large to evaluate."""


class DivisionNearZero(EPDynamicsError):
    """Denominator of an amplitude ratio vanished."""


class DegenerateCoupling(EPDynamicsError):
    """Non-adiabatic coupling is zero, so the fixed points sit at 0 and infinity."""


class SeriesDiverged(EPDynamicsError):
    """Derivative series grows from its first term on."""


class RootNotFound(EPDynamicsError):
    """No complex zero of lambda was found."""


class CurveEscaped(EPDynamicsError):
    """A level curve left the search box before meeting the real axis."""


class SpecialFunctionDomain(EPDynamicsError):
    """Argument outside the range covered by the special-function routines."""


class PoleAtInput(EPDynamicsError):
    """Mobius map evaluated at its pole."""


class StepTooLarge(EPDynamicsError):
    """Fixed stochastic step is too coarse for the drift."""


class WindowNotConverged(UserWarning):
    """Quadrature window reached its cap before the integrand decayed."""


class QuasiAdiabaticViolation(UserWarning):
    """Adiabaticity parameter too large for the asymptotic prediction."""


class ValidityWarning(UserWarning):
    """Parameters outside the regime where an approximation is justified."""
