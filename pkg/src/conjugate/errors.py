"""Exception hierarchy shared by every module."""


class ConjugateError(Exception):
    """Base class for all errors raised by this package."""


class ParseError(ConjugateError):
    def __init__(self, message, offset, expected=()):
        self.offset = offset
        self.expected = tuple(sorted(set(expected)))
        detail = f"{message} at offset {offset}"
        if self.expected:
            detail += f" (expected one of: {', '.join(self.expected)})"
        super().__init__(detail)


class DomainError(ConjugateError, ValueError):
    def __init__(self, message, value=None, location=None):
        self.value = value
        self.location = location
        if location is not None:
            message = f"{message} in '{location}'"
        super().__init__(message)


class DivisionByZero(DomainError):
    pass


class CriticalPoint(ConjugateError):
    """The gradient vanishes (to tolerance) at the requested point."""


class DegenerateY(ConjugateError):
    pass


class ConstraintViolation(ConjugateError):
    pass


class AmbiguousBranch(ConjugateError):
    pass


class WrongBranch(ConjugateError):
    pass


class BranchSwitch(ConjugateError):
    pass


class NonIntegrable(ConjugateError):
    pass


class PoleError(DomainError):
    pass


class NotLorentzian(ConjugateError):
    pass


class NotSkew(ConjugateError):
    pass


class IllConditioned(ConjugateError):
    pass


class RankDeficient(ConjugateError):
    pass


class NotClassifiable(ConjugateError):
    pass
