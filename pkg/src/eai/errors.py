"""Exception hierarchy shared by all eai modules."""


class EAIError(Exception):
    """Base class for every error raised by the package."""


class DimensionError(EAIError, ValueError):
    """Array shapes are inconsistent with the grid or with each other."""


class DataError(EAIError, ValueError):
    """Input contains non-finite values or is otherwise unusable."""


class PreconditionError(EAIError, ValueError):
    """An operation precondition (orthonormality, PSD, sign...) is violated."""


class ProtocolError(EAIError, ValueError):
    """A measurement record lacks the phases required for extraction."""


class RankError(EAIError, ValueError):
    """A source matrix has no retained singular values."""


class MaskError(EAIError, ValueError):
    """A measured matrix is missing entries needed for reconstruction."""


class LatticeError(EAIError, ValueError):
    """A regular lattice is required but absent or inconsistent."""


class FormatError(EAIError, IOError):
    """A container file is malformed (bad magic, header or payload)."""
