"""Exception hierarchy shared by all modules."""


class PoaError(Exception):
    """Base class for every error raised by this package."""


class SignatureError(PoaError):
    pass


class SortError(PoaError):
    """A term is ill-sorted; ``path`` locates the offending argument (1-based)."""

    def __init__(self, message, path=()):
        super().__init__(message)
        self.path = tuple(path)


class SubstitutionError(PoaError):
    pass


class ContextError(PoaError):
    pass


class ParseError(PoaError):
    pass


class AmbiguousParseError(ParseError):
    def __init__(self, message, candidates=()):
        super().__init__(message)
        self.candidates = list(candidates)


class RuleError(PoaError):
    """A rule violates the executability restriction on its variables."""


class BudgetExhausted(PoaError):
    """Normalization ran out of steps; ``trace`` holds the partial rewrite history."""

    def __init__(self, message, trace=()):
        super().__init__(message)
        self.trace = list(trace)


class MissingPreorderError(PoaError):
    pass


class AlgebraError(PoaError):
    pass


class PreconditionError(PoaError):
    pass


class ClosureError(PoaError):
    pass


class TranslationError(PoaError):
    pass


class PushoutError(PoaError):
    pass


class AmalgamationError(PoaError):
    pass
