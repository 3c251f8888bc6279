"""Exception hierarchy shared across the library and the CLI.

The CLI maps these onto stable exit codes: user/input problems exit 1,
numerical failures (NaN/Inf detected mid-computation) exit 2.
"""


class RingresError(Exception):
    """Base class for all library errors."""


class InputError(RingresError):
    """Bad user input: files, spec values, shapes the caller controls."""


class SpecFileError(InputError):
    """Experiment spec file is missing, malformed, or has unknown keys."""


class DatasetError(InputError):
    """Dataset manifest or series files are missing or inconsistent."""


class ModelFormatError(InputError):
    """Model file is corrupt, has a wrong magic tag, or an unknown version."""


class NumericalError(RingresError):
    """A computation produced NaN/Inf or otherwise left the finite domain."""
