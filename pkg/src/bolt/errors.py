"""Exception types raised across the pipeline."""


class BoltError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(BoltError, ValueError):
    """Input data violates a structural invariant (indices, shapes, topology)."""


class ConfigurationError(BoltError, ValueError):
    """A configuration value makes the requested operation impossible."""


class SolverError(BoltError, RuntimeError):
    """A numerical solve failed to converge or produced non-finite values."""

    def __init__(self, message, residual=None, iteration=None):
        super().__init__(message)
        self.residual = residual
        self.iteration = iteration


class TransferStalledError(SolverError):
    """The outer transfer loop stopped reducing the body gap."""

    def __init__(self, message, gap_history):
        super().__init__(message)
        self.gap_history = list(gap_history)


class PatternError(BoltError, RuntimeError):
    """Pattern optimization produced an invalid layout (e.g. flipped triangles)."""

    def __init__(self, message, triangles=()):
        super().__init__(message)
        self.triangles = list(triangles)


class SimulationError(BoltError, RuntimeError):
    """Cloth simulation blew up or produced non-finite state."""

    def __init__(self, message, substep=None, layer=None):
        super().__init__(message)
        self.substep = substep
        self.layer = layer


class RigTransferError(BoltError, RuntimeError):
    """Some cloth vertices found no body correspondence."""

    def __init__(self, message, orphans=()):
        super().__init__(message)
        self.orphans = list(orphans)


class ProxyError(BoltError, RuntimeError):
    """A dropped panel has no nearby kept surface to attach to."""

    def __init__(self, message, panels=()):
        super().__init__(message)
        self.panels = list(panels)


class StageError(BoltError, RuntimeError):
    """Wraps any failure inside a pipeline stage with its location."""

    def __init__(self, stage, garment, cause):
        super().__init__(f"stage '{stage}' failed for garment '{garment}': {cause}")
        self.stage = stage
        self.garment = garment
        self.cause = cause
