"""Document subspaces: fragment vectors, dimension selection, projectors.

A document's fragment vectors span its subspace; the projector onto
that subspace is the event "this document is relevant".  Dimension
selection keeps the top K eigenvectors of the fragment scatter.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .corpus import CorpusIndex, Document, Fragment, VocabularyStats, idf, segment
from .linalg import (
    IncrementalScatter,
    Projector,
    SparseVector,
    scatter_eigendecomposition,
)

# Documents with more fragments than this use the incremental
# decomposition with the fallback rank cap.
MAX_ONESHOT_FRAGMENTS = 512
FALLBACK_RANK = 128


@dataclass(frozen=True)
class DocumentSubspace:
    doc_id: str
    projector: Projector
    full_rank: int


def fragment_vector(
    fragment: Fragment, scheme: str, stats: VocabularyStats
) -> SparseVector | None:
    """Unit vector for one fragment, or None when every weight is zero
    (possible under tfidf when all terms occur in every document)."""
    counts: dict[int, float] = {}
    for token in fragment.tokens:
        tid = stats.term_ids[token]
        counts[tid] = counts.get(tid, 0.0) + 1.0
    if scheme == "binary":
        weights = {tid: 1.0 for tid in counts}
    elif scheme == "tf":
        weights = counts
    elif scheme == "tfidf":
        weights = {
            tid: count * idf(stats.terms[tid], stats)
            for tid, count in counts.items()
        }
    else:
        raise ValueError(f"unknown weighting scheme: {scheme!r}")
    vec = SparseVector.from_mapping(weights)
    if vec.norm == 0.0:
        return None
    return vec.unit()


def fragment_vectors(fragments, scheme: str, stats: VocabularyStats) -> list[SparseVector]:
    out = []
    for fragment in fragments:
        vec = fragment_vector(fragment, scheme, stats)
        if vec is not None:
            out.append(vec)
    return out


def select_dimension(eigenvalues, rule: str) -> int:
    """K under the selection rule: highest keeps 1, mean keeps the
    eigenvalues at or above their average, all keeps everything."""
    eigenvalues = np.asarray(eigenvalues, dtype=np.float64)
    if eigenvalues.size == 0:
        return 0
    if rule == "highest":
        return 1
    if rule == "all":
        return int(eigenvalues.size)
    if rule == "mean":
        return int(np.sum(eigenvalues >= np.mean(eigenvalues)))
    raise ValueError(f"unknown dimension rule: {rule!r}")


def _scatter_of_fragments(vectors):
    if len(vectors) > MAX_ONESHOT_FRAGMENTS:
        acc = IncrementalScatter(FALLBACK_RANK)
        for vec in vectors:
            acc.push(vec)
        evals, basis, _, _, _ = acc.result()
        return evals, basis
    return scatter_eigendecomposition(vectors)


def build_document_subspace(
    doc: Document, granularity: str, scheme: str, rule: str, stats: VocabularyStats
) -> DocumentSubspace:
    """Projector onto the span of the document's fragment vectors,
    truncated to K = select_dimension.  Zero usable fragments yield the
    zero projector."""
    vectors = fragment_vectors(segment(doc, granularity), scheme, stats)
    evals, basis = _scatter_of_fragments(vectors)
    k = select_dimension(evals, rule)
    return DocumentSubspace(
        doc_id=doc.doc_id,
        projector=Projector(basis=tuple(basis[:k])),
        full_rank=len(basis),
    )


class SubspaceBuilder:
    """Per-index cache of document scatter decompositions.

    Decompositions are keyed by (doc position, granularity, scheme) and
    shared across dimension rules, which only choose a basis prefix.
    """

    def __init__(self, index: CorpusIndex):
        self.index = index
        self._cache: dict[tuple[int, str, str], tuple[np.ndarray, list[SparseVector]]] = {}

    def eigenpairs(self, pos: int, granularity: str, scheme: str):
        key = (pos, granularity, scheme)
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        fragments = self.index.fragments[granularity][pos]
        vectors = fragment_vectors(fragments, scheme, self.index.vocab)
        result = _scatter_of_fragments(vectors)
        self._cache[key] = result
        return result

    def subspace(self, pos: int, granularity: str, scheme: str, rule: str) -> DocumentSubspace:
        evals, basis = self.eigenpairs(pos, granularity, scheme)
        k = select_dimension(evals, rule)
        return DocumentSubspace(
            doc_id=self.index.doc_ids[pos],
            projector=Projector(basis=tuple(basis[:k])),
            full_rank=len(basis),
        )
