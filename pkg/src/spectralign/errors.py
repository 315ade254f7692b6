"""Exception types raised across the package."""


class SpectralignError(Exception):
    """Base class for all package errors."""


class MeshError(SpectralignError, ValueError):
    pass


class ParseError(MeshError):
    """Malformed or unsupported mesh file."""


class NonManifold(MeshError):
    """An undirected edge is shared by more than two faces."""


class DegenerateFace(MeshError):
    """A face repeats a vertex or has (numerically) zero area."""


class ConvergenceFailure(SpectralignError, RuntimeError):
    pass


class SingularMass(SpectralignError, ValueError):
    pass


class StalledOptimization(SpectralignError, RuntimeError):
    pass


class AllStalled(SpectralignError, RuntimeError):
    """Every start of a multi-start localization stalled."""


class DegenerateCut(SpectralignError, ValueError):
    """A cut produced a partial shape outside the allowed size bounds."""


class GenerationExhausted(SpectralignError, RuntimeError):
    pass


class EmptyUnion(SpectralignError, ValueError):
    pass
