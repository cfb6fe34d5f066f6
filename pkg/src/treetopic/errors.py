"""Exception hierarchy shared across the package."""


class TreeTopicError(Exception):
    pass


class DrtError(TreeTopicError, ValueError):
    """Invalid directed rooted tree input."""


class CycleError(DrtError):
    pass


class MultiRootError(DrtError):
    pass


class DisconnectedError(DrtError):
    pass


class NotRealizableError(DrtError):
    """A collection of node sets that no directed rooted tree generates."""


class DomainError(TreeTopicError, ValueError):
    pass


class NonConvergenceError(TreeTopicError, RuntimeError):
    pass


class DegenerateError(TreeTopicError, ValueError):
    pass


class SizeError(TreeTopicError, ValueError):
    """Exact enumeration requested above its size cap."""


class InfiniteKLError(TreeTopicError, ArithmeticError):
    def __init__(self, message, tv=None):
        super().__init__(message)
        self.tv = tv


class FloorError(TreeTopicError, ValueError):
    pass


class ShapeError(TreeTopicError, ValueError):
    pass


class FormatError(TreeTopicError, ValueError):
    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class IdOutOfRangeError(FormatError):
    pass


class ChecksumError(TreeTopicError, RuntimeError):
    """A file recorded in a run manifest no longer matches its checksum."""
