class NumericalGuardError(RuntimeError):
    """A numerical safety check refused to continue."""


class ConfigError(ValueError):
    """Invalid experiment configuration."""
