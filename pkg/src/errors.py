"""
Error types raised by the toolkit. Only main.py turns them into exit codes.
"""

from typing import Any, Optional, Tuple


class WrfqError(Exception):
    """Base class for all toolkit errors."""


class GraphError(WrfqError):
    """Graph or fine graph violates its structural invariants."""


class GroupActionError(WrfqError):
    """Permutation table is not a group action by graph automorphisms."""


class QuotientError(WrfqError):
    """Quotient data is inconsistent (preimages disagree, non-normalizing generator)."""


class NonGraphicError(WrfqError):
    """m[v, w] != 0 while m[w, v] == 0."""

    def __init__(self, pair: Tuple[Any, Any]):
        self.pair = pair
        super().__init__(f"non-graphic weights at pair {pair}")


class NormalizationError(WrfqError):
    pass


class CuspPatternError(WrfqError):
    pass


class TransferError(WrfqError):
    pass


class ShellError(WrfqError):
    pass


class UnsupportedParametersError(WrfqError):
    pass


class EnumerationLimitError(WrfqError):
    pass


class UnknownCaseError(WrfqError):
    pass


class DocumentError(WrfqError):
    """Syntax or semantic error in a WcfgDocument; position is 'line:col' or a JSON path."""

    def __init__(self, message: str, position: Optional[str] = None):
        self.position = position
        super().__init__(f"{message} (at {position})" if position else message)
