"""Exception hierarchy.

Every error is either a :class:`DomainError` (bad input or a point outside
the region where a formula applies; CLI exit code 2) or a
:class:`NumericalError` (the computation itself broke down; exit code 3).
"""


class BlochError(Exception):
    exit_code = 1


class DomainError(BlochError):
    exit_code = 2


class NumericalError(BlochError):
    exit_code = 3


class InvalidLattice(DomainError):
    pass


class InvalidPotential(DomainError):
    pass


class ConfigError(DomainError):
    pass


class NotPrimitive(DomainError):
    pass


class NotLatticePoint(DomainError):
    pass


class OutOfShell(DomainError):
    pass


class OrderTooHigh(DomainError):
    pass


class NoCandidate(DomainError):
    pass


class Ambiguous(DomainError):
    pass


class NeedDirections(DomainError):
    pass


class InconsistentSites(DomainError):
    pass


class IndexOutOfRange(DomainError):
    pass


class BasisTooSmall(DomainError):
    pass


class UseDirectionalPath(DomainError):
    pass


class OutsideW(DomainError):
    pass


class WrongVariant(DomainError):
    pass


class TooLarge(DomainError):
    pass


class UntrustedWindow(DomainError):
    pass


class NoSignChange(DomainError):
    pass


class SmallDenominator(NumericalError):
    def __init__(self, message, where=None):
        super().__init__(message)
        self.where = where


class NumericalFailure(NumericalError):
    pass


class LabelingAmbiguity(NumericalError):
    pass


class LostSimplicity(NumericalError):
    pass
