"""Semantic exception hierarchy shared across the package."""


class OrdlabError(Exception):
    """Base class for all package-specific failures."""


class InvalidDistributionError(OrdlabError):
    """A latent-distribution specification is internally inconsistent."""


class InvalidProfileError(OrdlabError):
    """A reporting profile or scale violates its ordering constraints."""


class DomainError(OrdlabError):
    """An argument lies outside the mathematical domain of an operation."""


class DimensionError(OrdlabError):
    """Regressor points do not conform with a structural model."""


class UnknownPresetError(OrdlabError):
    """A named data-generating process does not exist."""


class EstimationError(OrdlabError):
    """An estimation routine cannot produce a valid result."""


class RankError(EstimationError):
    """A regression design matrix is rank deficient."""

    def __init__(self, message, columns=()):
        super().__init__(message)
        self.columns = tuple(columns)


class SingularPathError(EstimationError):
    """The reference derivative vanishes along a recovery path."""


class ConfigError(OrdlabError):
    """A run configuration fails schema validation."""
