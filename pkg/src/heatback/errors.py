"""Exception types separating misuse from falsified mathematics."""


class ConfigError(Exception):
    """Bad configuration or input: wrong keys, ranges, or preconditions."""


class BoundViolation(Exception):
    """A certified inequality failed at runtime; never expected on valid runs."""
