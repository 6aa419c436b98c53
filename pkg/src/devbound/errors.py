"""Exception hierarchy shared by all modules (the CLI maps these to exit codes)."""


class DevboundError(Exception):
    pass


class ValidationError(DevboundError, ValueError):
    """A parameter violates a documented invariant; exit code 1."""


class ResourceError(DevboundError):
    """A size cap was exceeded; exit code 2."""


class RepresentabilityError(ResourceError):
    """An operation needs an integer count that only exists as a logarithm."""


class DivergenceError(ValidationError):
    """A required series sum is infinite."""
