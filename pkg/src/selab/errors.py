"""Exception hierarchy shared by all selab modules."""


class SelabError(Exception):
    """Base class for selab errors."""


class MeshError(SelabError, ValueError):
    pass


class ProblemError(SelabError, ValueError):
    pass


class NonIntegrableInner(SelabError):
    """The inner integral of g from 0 to t diverges for every t > 0."""


class SingularSystem(SelabError):
    pass


class IterationLimit(SelabError):
    pass


class OrderViolation(SelabError):
    """A monotone iterate left the order interval [sub, super]."""


class BadInitialBracket(SelabError):
    pass


class FoldNotResolved(SelabError):
    pass


class WindowTooSparse(SelabError):
    pass


class ConfigError(SelabError, ValueError):
    pass
