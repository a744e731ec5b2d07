"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """Raised for invalid scenario, scheme or campaign configuration."""


class SolverError(RuntimeError):
    """Raised when an optimizer fails to converge or is misused."""
