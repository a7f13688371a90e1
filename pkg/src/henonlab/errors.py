"""Exception hierarchy shared by every henonlab module."""


class HenonLabError(Exception):
    """Base class for domain errors.

    ``step`` and ``t`` are filled in when the error surfaces from inside an
    integration run; ``label`` when it surfaces from a named scenario.
    """

    step = None
    t = None
    label = None

    def at_step(self, step, t):
        self.step = step
        self.t = t
        return self

    def __str__(self):
        msg = super().__str__()
        if self.step is not None:
            msg = f"{msg} (step {self.step}, t={self.t:.17g})"
        return msg


class NonPositiveWidth(HenonLabError, ValueError):
    """A width parameter G_i fell below the admissible floor."""


class NonFinite(HenonLabError, ArithmeticError):
    """A state or stage evaluation produced NaN or Inf."""


class OutOfBracket(HenonLabError, ValueError):
    """Interpolation time outside the step bracket."""


class ZeroReferenceEnergy(HenonLabError, ValueError):
    """Relative drift requested against a zero initial energy."""


class RefinementFailure(HenonLabError):
    """Crossing bisection did not reach tolerance."""


class InvalidBranch(HenonLabError, ValueError):
    """2 x2' + 1 <= 0 in the equal-energy neighbor construction."""


class NegativeDiscriminant(HenonLabError, ValueError):
    """No real equal-energy neighbor exists on this branch."""


class DegenerateOffset(HenonLabError, ValueError):
    """The neighbor coincides with the primary point in configuration space."""


class SeparationUnderflow(HenonLabError, ArithmeticError):
    """Two orbits met exactly, ln d(t) is undefined."""


class ObserverError(HenonLabError):
    """An observer raised during an integration run."""


class HbarTooLarge(HenonLabError, ValueError):
    """hbar exceeds the E/10 admissibility bound without an override."""


class MissingColumn(HenonLabError, KeyError):
    pass


class EmptyData(HenonLabError, ValueError):
    pass


class ScenarioFailed(HenonLabError):
    """Wraps any error raised while running a labelled scenario."""

    def __init__(self, label, cause):
        super().__init__(f"scenario {label}: {type(cause).__name__}: {cause}")
        self.label = label
        self.cause = cause
