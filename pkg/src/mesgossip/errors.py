"""Exception types raised across the package."""


class MalformedSelection(ValueError):
    """A selection or schedule map is missing a carrier or has the wrong shape."""


class InfeasibleDispatch(ValueError):
    """A requested dispatch violates a unit's technical limits."""

    def __init__(self, message: str, slot: int | None = None):
        super().__init__(message)
        self.slot = slot


class MalformedMessage(ValueError):
    """A negotiation message failed validation and was dropped."""


class ConfigError(ValueError):
    """Scenario configuration failed schema or invariant validation."""

    def __init__(self, message: str, field: str | None = None):
        if field is not None:
            message = f"{field}: {message}"
        super().__init__(message)
        self.field = field


class MetricUndefined(ValueError):
    """A metric was requested for an input where it is not defined."""


class OracleTooLarge(ValueError):
    """The brute-force search space exceeds the configured limit."""
