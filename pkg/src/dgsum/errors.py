"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: ConfigError -> 1, DataError -> 2,
NumericError (and ShapeError) -> 3.
"""


class DgsumError(Exception):
    pass


class ConfigError(DgsumError):
    """Bad configuration: unknown keys, invalid values, incompatible dims."""


class DataError(DgsumError):
    """Malformed or missing input data (files, records, annotations)."""


class ShapeError(DgsumError):
    """Tensor shape mismatch; message names the primitive and the shapes."""


class NumericError(DgsumError):
    """Non-finite values or precision-mode violations during computation."""


class AlignmentError(DgsumError):
    """Graph nodes and encoder boundaries disagree."""
