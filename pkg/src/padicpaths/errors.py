"""Exception hierarchy shared by all modules."""

from __future__ import annotations


class PadicPathsError(Exception):
    """Base class for all library errors."""


class PrecisionExhausted(PadicPathsError):
    """An operation could not reach (or maintain) the requested precision."""


class DivisionByZero(PadicPathsError):
    """Division by an exact zero."""


class OutOfDomain(PadicPathsError):
    """Evaluation point outside the domain of a series or rigid function."""


class TruncationTooShort(PadicPathsError):
    """The series truncation order cannot support the requested output."""


class NonzeroResidue(PadicPathsError):
    """Primitive requested for a 1-form with a nonvanishing residue."""

    def __init__(self, point, value):
        super().__init__(f"nonzero residue at {point}: {value}")
        self.point = point
        self.value = value


class NotAUnitNearOne(PadicPathsError):
    """rigid_log_unit input does not reduce to 1 away from the marked discs."""


class DifferentDiscs(PadicPathsError):
    """tiny_transport endpoints lie in different residue discs."""


class CollidingReductions(PadicPathsError):
    """Two marked points share a residue disc."""


class LiftConditionViolated(PadicPathsError):
    """A Frobenius lift fails phi*(I_a) = I_a^p at a claimed point."""


class NonUnitConstantTerm(PadicPathsError):
    """Inversion of a noncommutative series whose constant term is not a unit."""


class GaugeResidualTooLarge(PadicPathsError):
    """The comparison gauge does not satisfy its defining equation to precision."""


class ResidualTooLarge(PadicPathsError):
    """The invariant-path functional equation residual exceeds tolerance."""


class OutOfRegion(PadicPathsError):
    """Target disc lies outside a gauge's validity region."""


class WeightExceedsTruncation(PadicPathsError):
    """Requested coefficient weight exceeds the series truncation."""
