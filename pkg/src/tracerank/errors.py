"""Exception hierarchy shared across the package."""


class TraceRankError(Exception):
    """Base class for all errors raised by tracerank."""


class CorpusError(TraceRankError):
    """Invalid document, duplicate id, or malformed corpus file."""


class DegenerateDensityError(TraceRankError):
    """An operator that should be a density has non-positive trace."""


class UnknownTermError(TraceRankError):
    """A term is not present in the corpus vocabulary."""

    def __init__(self, term: str):
        super().__init__(f"unknown term: {term!r}")
        self.term = term


class DegenerateTermError(TraceRankError):
    """A term occurs in the corpus but every fragment vector collapsed to zero."""

    def __init__(self, term: str):
        super().__init__(f"term {term!r} has no usable fragment vectors")
        self.term = term


class StoreFormatError(TraceRankError):
    """Term-density store file is corrupt, truncated, or has a bad version."""


class StoreMismatchError(TraceRankError):
    """Store header parameters disagree with the index or the requested config."""


class EmptyQueryError(TraceRankError):
    """No query term survived preprocessing / store lookup."""


class EvaluationError(TraceRankError):
    """Qrels problem or an aggregation over an empty selection."""
