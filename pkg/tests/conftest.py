"""Shared fixtures: a tiny hand-written collection and helpers for
constructing term summaries with known spectra."""

from __future__ import annotations

import numpy as np
import pytest

from tracerank.corpus import build_index, make_document
from tracerank.linalg import SparseVector
from tracerank.termdensity import TermDensitySummary

TINY_DOCS = [
    ("d1", ["Quantum models of information retrieval.",
            "Documents become subspaces. Queries become density operators."]),
    ("d2", ["Probabilistic ranking with term statistics.",
            "Classical retrieval scores documents by term overlap."]),
    ("d3", ["Subspace geometry for ranking documents.",
            "A projector captures every fragment of the document."]),
    ("d4", ["Cooking pasta with garlic and olive oil.",
            "Simmer the sauce. Serve the pasta hot."]),
]


@pytest.fixture(scope="session")
def tiny_documents():
    return [make_document(doc_id, paragraphs) for doc_id, paragraphs in TINY_DOCS]


@pytest.fixture(scope="session")
def tiny_index(tiny_documents):
    return build_index(tiny_documents)


def make_summary(term: str, term_id: int, rows: np.ndarray,
                 df: int | None = None) -> TermDensitySummary:
    """Build the exact trace-one density of the given unit rows, the
    way the streaming builder would with no truncation."""
    n = rows.shape[0]
    scatter = rows.T @ rows
    evals, evecs = np.linalg.eigh(scatter)
    order = np.argsort(evals)[::-1]
    evals = evals[order]
    evecs = evecs[:, order]
    keep = evals > 1e-12
    evals = evals[keep] / n
    basis = evecs[:, keep].T
    ids = np.arange(rows.shape[1], dtype=np.int64)
    vectors = tuple(SparseVector(ids, row.astype(np.float64)) for row in basis)
    mean = SparseVector(ids, rows.mean(axis=0))
    return TermDensitySummary(
        term=term,
        term_id=term_id,
        eigenvalues=np.ascontiguousarray(evals),
        vectors=vectors,
        mean_vector=mean,
        n_vectors=n,
        df=n if df is None else df,
    )
