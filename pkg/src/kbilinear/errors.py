"""Exception types raised across the package."""


class KBilinearError(Exception):
    """Base class for package errors."""


class UnsupportedSmoothnessError(KBilinearError, ValueError):
    """Wendland smoothness degree without an implemented profile."""


class DuplicateCentersError(KBilinearError, ValueError):
    pass


class NumericallyIndefiniteError(KBilinearError, ArithmeticError):
    """Cholesky factorization of a kernel matrix failed."""


class TrajectoryDivergedError(KBilinearError, ArithmeticError):
    pass


class ExcitationError(KBilinearError, ValueError):
    """Input design violates the rank condition on the ones-augmented inputs."""


class DatasetFormatError(KBilinearError, ValueError):
    pass


class ConfigError(KBilinearError, ValueError):
    pass
