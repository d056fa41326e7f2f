"""Shared exception types."""


class TrustPipeError(Exception):
    """Base for all domain errors; maps to CLI exit code 1."""


class InvariantError(TrustPipeError):
    """A document parsed but violates a named structural rule."""


class ConflictError(TrustPipeError):
    """Write rejected because it contradicts existing state."""


class NotFoundError(TrustPipeError):
    """Lookup of an unknown id."""
