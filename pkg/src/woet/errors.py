"""Exception hierarchy shared by all modules."""


class WoetError(Exception):
    """Base class for every error raised by this package."""


class GroundMismatch(WoetError):
    """Two objects that must live on the same ground set do not."""


class ZeroMassRow(WoetError):
    """Disintegration requested for a row carrying no mass."""


class NegativeScale(WoetError, ValueError):
    pass


class NegativeArgument(WoetError, ValueError):
    pass


class PsiOutOfDomain(WoetError, ValueError):
    """No (BM) witness exists because psi >= F(0)."""


class NotAProbability(WoetError, ValueError):
    pass


class EmptyFinitePart(WoetError, ValueError):
    """Convex envelope requested for data without a single finite value."""


class ShapeMismatch(WoetError, ValueError):
    pass


class InfeasibleProblem(WoetError):
    """The primal problem has no coupling of finite cost."""

    def __init__(self, reason):
        super().__init__(reason)
        self.reason = reason


class TooLarge(WoetError, ValueError):
    pass


class InfeasiblePair(WoetError, ValueError):
    pass


class InfeasibleTriple(WoetError, ValueError):
    pass


class ConstraintViolated(WoetError, ValueError):
    pass


class HypothesesNotMet(WoetError):
    pass


class ParseError(WoetError, ValueError):
    """Malformed problem or report document."""


class ValidationError(WoetError, ValueError):
    """Well-formed document that violates a model invariant."""


class IoError(WoetError, OSError):
    """Reading or writing a file failed."""
