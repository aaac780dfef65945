"""Exception hierarchy shared across the package.

``InputError`` subclasses mark problems with user-supplied data (bad SMILES,
malformed dataset lines, unreadable checkpoints); everything else signals a
broken internal contract. The CLI maps the former to exit code 1 and the
latter to exit code 2.
"""


class OrmaError(Exception):
    """Base class for all package errors."""


class DimensionError(OrmaError):
    """Operand shapes are incompatible."""


class ContractError(OrmaError):
    """A documented precondition was violated."""


class TapeError(OrmaError):
    """Invalid use of a gradient tape (reuse after backward, missing tape)."""


class NumericError(OrmaError):
    """A computation produced NaN/Inf where finite values are required."""


class InputError(OrmaError):
    """User-supplied input is invalid."""


class LexicalError(InputError):
    """Unrecognized character while tokenizing a SMILES string."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} at position {position}")
        self.position = position


class ParseError(InputError):
    """Structurally invalid SMILES string."""


class DatasetError(InputError):
    """Malformed or unusable dataset file."""


class CheckpointError(InputError):
    """Unreadable, truncated, or incompatible checkpoint file."""
