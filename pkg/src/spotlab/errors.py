"""Exception hierarchy shared by all spotlab modules."""


class SpotlabError(Exception):
    """Base class for all spotlab errors."""


class DomainError(SpotlabError):
    """Input is outside the physically or logically valid domain."""


class UnknownLineError(DomainError, KeyError):
    """Requested isotope/transition is not in the catalog."""


class InsufficientDataError(DomainError):
    """Not enough data points to perform the requested operation."""


class DegeneratePairError(DomainError):
    """Beam-pair measurement is degenerate (perpendicular geometry)."""


class MissingReferenceError(DomainError):
    """The 174 reference peak is absent from the peak set."""


class NumericalError(SpotlabError):
    """A numerical procedure failed (rank deficiency, no bracket, ...)."""


class RankDeficientError(NumericalError):
    """Least-squares design matrix is rank deficient."""


class ConfigError(SpotlabError):
    """Malformed configuration file or unknown key."""
