"""Exception types shared across the package.

Input-side problems (bad schemas, bad parameters, empty cohorts) and
numeric failures are kept distinct so the CLI can map them to different
exit codes.
"""


class InputError(ValueError):
    """Base class for problems with user-supplied data or parameters."""


class SchemaError(InputError):
    """A record, table, or codec does not match the declared schema."""


class ParameterError(InputError):
    """A configuration value is out of its legal range."""


class CohortEmptyError(InputError):
    """A filtering step left no usable data."""


class NumericError(RuntimeError):
    """A numerical routine produced non-finite intermediates or diverged."""
