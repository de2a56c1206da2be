"""Exception types raised across the package."""


class ConlassoError(Exception):
    pass


class ProblemValidationError(ConlassoError, ValueError):
    """Invalid problem data; ``errors`` lists every violation found."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


class IncompatibleMethodError(ConlassoError, ValueError):
    def __init__(self, kind, method):
        self.kind = kind
        self.method = method
        super().__init__(f"method {method} is not available for formulation {kind}")


class MaxIterExceeded(ConlassoError):
    """Iterative solver hit ``max_iter``; carries the last iterate."""

    def __init__(self, solution, residual):
        self.solution = solution
        self.residual = residual
        super().__init__(
            f"no convergence after {solution.diagnostics.get('iterations')} "
            f"iterations (residual {residual:.3e})")


class MaxBreakpointsExceeded(ConlassoError):
    def __init__(self, path, cap):
        self.path = path
        super().__init__(f"path exceeded {cap} breakpoints")


class DegeneratePath(ConlassoError):
    pass


class FoldTooSmall(ConlassoError, ValueError):
    pass


class SubsampleTooSmall(ConlassoError, ValueError):
    pass
