"""Exception types shared across the package."""


class ConfigError(Exception):
    """Raised for unreadable, malformed, or unknown configuration input."""


class NumericalError(Exception):
    """Raised when a solver or numerical routine fails beyond tolerance."""


class BracketError(NumericalError):
    """Raised when a root bracket does not straddle a sign change."""
