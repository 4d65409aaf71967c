"""Exception types shared across the package."""


class DomainError(ValueError):
    """An operation was called outside its domain of validity."""


class ConfigError(ValueError):
    """An experiment configuration violates the schema or a consistency rule."""


class ConsistencyError(RuntimeError):
    """An internal numerical consistency check failed (e.g. a residue that
    should vanish exceeded its tolerance)."""
