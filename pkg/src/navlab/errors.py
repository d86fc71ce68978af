"""Exception taxonomy shared across the package."""


class NavlabError(Exception):
    """Base class for all navlab errors."""


class ConfigurationError(NavlabError):
    """Invalid configuration: bad shapes, unknown modes, inconsistent settings."""


class UsageError(NavlabError):
    """An operation was called outside its contract (bad pose, non-scalar loss, ...)."""


class NumericalError(NavlabError):
    """Non-finite values where finite ones are required."""


class GenerationError(NavlabError):
    """Procedural world generation failed its invariants after bounded retries."""


class SamplingError(NavlabError):
    """Episode rejection sampling exhausted its retry budget."""
