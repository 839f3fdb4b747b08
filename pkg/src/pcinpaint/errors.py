"""Exception types raised across the package."""


class PlyFormatError(ValueError):
    """Malformed PLY header or body."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class PlyTruncatedError(PlyFormatError):
    """The body holds fewer vertices than the header declares."""


class DegenerateInputError(ValueError):
    pass


class CapacityError(ValueError):
    pass


class ConfigError(ValueError):
    pass


class DegenerateDCError(ValueError):
    """The normals of a cube sum to (numerically) zero."""


class NoCandidateError(RuntimeError):
    pass


class RegistrationError(RuntimeError):
    pass


class SolverError(RuntimeError):
    def __init__(self, message, residual=None):
        self.residual = residual
        super().__init__(message)
