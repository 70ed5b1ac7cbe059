"""Exception hierarchy for robust_tandem."""


class RobustTandemError(Exception):
    """Base class for all package errors."""


class DomainError(RobustTandemError, ValueError):
    """An observation lies outside the support of the nominal model."""


class ClassesNotDisjointError(RobustTandemError, ValueError):
    """The two contamination classes overlap (solved c' >= c'')."""

    def __init__(self, message, c_lo=None, c_hi=None):
        super().__init__(message)
        self.c_lo = c_lo
        self.c_hi = c_hi


class DegeneratePosteriorError(RobustTandemError):
    """A social-learning trajectory collapsed to P_F or P_M in {0, 1}.

    ``stages`` and ``rules`` hold the partial trajectory computed before the
    collapse.
    """

    def __init__(self, message, stages=(), rules=()):
        super().__init__(message)
        self.stages = list(stages)
        self.rules = list(rules)


class NoContractionError(RobustTandemError):
    """The relay recurrence has slope one, so there is no unique fixed point."""


class SchemeInapplicableError(RobustTandemError):
    """The asymptotic-learning scheme needs eps0 = 0 and an LLR unbounded above."""


class DominanceViolationError(RobustTandemError, AssertionError):
    """A simulated contamination beat the least-favorable chain error."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class VerificationError(RobustTandemError):
    """An ex-post structural check on an optimizer result failed."""


class ConfigError(RobustTandemError, ValueError):
    """Malformed experiment configuration."""
