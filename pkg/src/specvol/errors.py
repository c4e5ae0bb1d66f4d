"""Exception types shared across the solver."""


class SpecvolError(Exception):
    """Base class for all solver errors."""


class NonDistinctRoots(SpecvolError):
    """Root finding failed to locate the expected number of distinct zeros."""


class ExactnessViolation(SpecvolError):
    """A quadrature rule failed its required polynomial-exactness check."""


class NotSPD(SpecvolError):
    """A mass matrix that must be symmetric positive definite is not."""


class InvalidMesh(SpecvolError):
    """Mesh construction produced non-increasing edges or violated a bound."""


class NonPhysicalState(SpecvolError):
    """A gas state with non-positive density or pressure was encountered.

    Carries optional context (cell index, stage, time) attached by the caller.
    """

    def __init__(self, message, cell=None, stage=None, time=None):
        super().__init__(message)
        self.cell = cell
        self.stage = stage
        self.time = time

    def __str__(self):
        base = super().__str__()
        ctx = []
        if self.cell is not None:
            ctx.append(f"cell={self.cell}")
        if self.stage is not None:
            ctx.append(f"stage={self.stage}")
        if self.time is not None:
            ctx.append(f"t={self.time:.6g}")
        return base + (" [" + ", ".join(ctx) + "]" if ctx else "")


class UnknownScheme(SpecvolError):
    """Requested Runge-Kutta scheme name is not registered."""


class UnknownBenchmark(SpecvolError):
    """Requested benchmark name is not in the registry."""


class NoProgress(SpecvolError):
    """The time step underflowed; the run cannot advance."""


class ParseError(SpecvolError):
    """Config text could not be parsed; message lists line numbers."""


class ValidationError(SpecvolError):
    """Config parsed but violates an invariant; message lists diagnostics."""


class IoError(SpecvolError):
    """Output files could not be written."""
