"""Exception taxonomy mirrored by the CLI exit codes."""

__all__ = ["ConfigError", "GuardError", "InvariantError"]


class ConfigError(ValueError):
    """Invalid or inconsistent experiment configuration (exit code 4)."""


class GuardError(RuntimeError):
    """A resource or resolvability guard refused to run (exit code 3)."""


class InvariantError(AssertionError):
    """A verified invariant failed at runtime (exit code 2)."""
