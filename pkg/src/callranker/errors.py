"""Exception hierarchy shared across the toolkit."""


class CallRankerError(Exception):
    """Base class for all toolkit errors."""


class DataError(CallRankerError):
    """Input data is malformed, inconsistent, or unusable (CLI exit code 2)."""


class ToolchainError(CallRankerError):
    """A required external tool (node) is missing or misbehaving."""
