"""Exception hierarchy shared by all modules."""


class PolyspecError(Exception):
    """Base class for every error raised by this package."""


class ArgumentError(PolyspecError, ValueError):
    """An argument is outside its documented domain."""


class UnsupportedDimensionError(ArgumentError):
    """The requested operation is not defined in this spatial dimension."""


class SpecMismatchError(ArgumentError):
    """Two objects were built on different lattices."""


class NumericalError(PolyspecError, ArithmeticError):
    """A numerical routine failed or produced an out-of-contract result.

    ``diagnostics`` carries whatever the raising site knew about the input
    (shape, norms, offending values) so that a quarantined sample can be
    reported without re-running it.
    """

    def __init__(self, message, **diagnostics):
        super().__init__(message)
        self.diagnostics = diagnostics


class RankDeficientError(NumericalError):
    def __init__(self, message, null_dim):
        super().__init__(message, null_dim=null_dim)
        self.null_dim = null_dim


class PoleProximityError(NumericalError):
    def __init__(self, message, z, nearest):
        super().__init__(message, z=z, nearest=nearest)
        self.z = z
        self.nearest = nearest


class SingularSystemError(NumericalError):
    """The direct conduction system is singular beyond its constant kernel."""


class ConfigError(PolyspecError, ValueError):
    """Invalid experiment configuration; ``path`` locates the bad field."""

    def __init__(self, path, message):
        if isinstance(path, str):
            path = tuple(p for p in path.split("/") if p and p != "<root>")
        where = "/".join(str(p) for p in path) or "<root>"
        super().__init__(f"{where}: {message}")
        self.path = tuple(path)
