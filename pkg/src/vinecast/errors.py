"""Exception hierarchy shared by all vinecast modules."""


class VinecastError(Exception):
    """Base class for all errors raised by this package."""


class SingularRealizedCov(VinecastError):
    """Realized covariance matrix is not positive definite (too few
    intraday periods or degenerate returns)."""


class NotPositiveDefinite(VinecastError):
    """A matrix expected to be positive definite is not."""


class AsymmetricMatrix(VinecastError):
    """Input matrix asymmetry exceeds the symmetrization tolerance."""


class CorrelationAtBoundary(VinecastError):
    """A correlation is too close to +-1 for the Fisher z-transform."""


class DegenerateConditioner(VinecastError):
    """A conditioning correlation is too close to +-1 in the partial
    correlation recursion."""


class SingularMatrix(VinecastError):
    """A correlation submatrix is numerically singular."""


class InvalidStructure(VinecastError):
    """An R-vine structure violates one of its defining properties."""


class OptimizerDiverged(VinecastError):
    """A numerical optimizer failed to produce a usable optimum."""


class NonStationary(VinecastError):
    """Fitted GARCH parameters violate the stationarity constraint."""


class DegenerateSample(VinecastError):
    """Sample is unusable for fitting (constant or near-constant)."""


class InfeasibleTarget(VinecastError):
    """Portfolio target return is unattainable for the given inputs."""


class ConfigError(VinecastError):
    """Configuration file or CLI parameter violates the schema."""


class DataFormatError(VinecastError):
    """An input data file does not match its documented format."""
