"""Exception types. Each maps to a CLI exit code."""


class DDMError(Exception):
    exit_code = 1


class StackFormatError(DDMError):
    """Malformed or inconsistent input stack."""

    exit_code = 1


class PlanningError(DDMError):
    """Memory budget cannot hold the minimum working set."""

    exit_code = 2


class ResultIOError(DDMError):
    """Reading or writing results failed."""

    exit_code = 3


class MergeError(ResultIOError):
    """Partial results do not cover the wave-vector set exactly once."""
