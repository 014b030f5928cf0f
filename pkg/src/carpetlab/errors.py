class CarpetLabError(Exception):
    """Base class for errors raised by carpetlab."""


class CapExceeded(CarpetLabError):
    """A level, mesh or memory cap would be exceeded."""


class SingularSystem(CarpetLabError):
    """The pinned Laplacian is singular (some component has no pinned node)."""


class ConvergenceError(CarpetLabError):
    """An iterative procedure stopped before reaching its tolerance.

    ``bound`` carries the best error bound (or residual) that was achieved and
    ``iterations`` the work spent, so callers can decide whether to accept it.
    """

    def __init__(self, message, bound=None, iterations=None):
        super().__init__(message)
        self.bound = bound
        self.iterations = iterations
