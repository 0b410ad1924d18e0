"""Exception hierarchy shared across the toolkit.

The CLI maps these onto exit codes: usage errors exit 1, DataError and
subclasses exit 2, NumericError exits 3.
"""


class DesenseError(Exception):
    """Base class for all toolkit errors."""


class DataError(DesenseError):
    """Malformed or inconsistent input data."""


class SizeMismatchError(DataError):
    """Operands have incompatible dimensions."""


class NetpbmError(DataError):
    """Base class for NetPBM parse/serialize failures."""


class BadMagicError(NetpbmError):
    """Unrecognized or unsupported NetPBM magic number."""


class TruncatedError(NetpbmError):
    """Payload shorter (or longer) than the header promises."""


class MaxvalError(NetpbmError):
    """File declares a maxval other than 255."""


class MaskDomainError(NetpbmError):
    """Mask file contains a sample outside {0, 255}."""


class DatasetError(DataError):
    """Dataset directory or labels file is invalid."""


class OutOfBandError(DataError):
    """Mask ratio falls outside the six coverage-level bands."""


class BandUnreachableError(DataError):
    """Rejection sampling failed to produce a mask in the requested ratio band."""


class NumericError(DesenseError):
    """Non-finite value or numeric degeneracy encountered."""


class CheckpointError(DataError):
    """Model checkpoint bytes are malformed."""
