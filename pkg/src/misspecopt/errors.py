"""Exception hierarchy shared across the package."""


class MisspecError(Exception):
    """Base class for all package errors."""


class DomainError(MisspecError, ValueError):
    """A point lies outside the support of a distribution."""


class DataError(MisspecError, ValueError):
    """Data unusable for fitting (empty, non-finite, wrong shape)."""


class NumericError(MisspecError, ArithmeticError):
    """A quadrature or moment computation produced a non-finite value."""


class DirectionError(MisspecError, ValueError):
    """A perturbation direction has non-finite moments under the base law."""


class DivergenceError(MisspecError, ArithmeticError):
    """A tilt normalization constant does not converge."""


class CoverageError(MisspecError, ValueError):
    """The sampling grid leaves non-negligible mass outside its box."""


class SolverError(MisspecError, RuntimeError):
    """An optimizer failed to bracket or converge."""


class AssumptionError(MisspecError, ValueError):
    """A regularity assumption (rank, invertibility) fails numerically."""


class ConfigError(MisspecError, ValueError):
    """Invalid experiment configuration."""
