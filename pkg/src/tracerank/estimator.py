"""Estimator-style facade over the retrieval pipeline.

SubspaceRetriever follows the scikit-learn conventions: constructor
stores hyperparameters verbatim, fit() validates them and indexes the
corpus, fitted state lives in trailing-underscore attributes, and
get_params/set_params come from BaseEstimator (so the retriever can sit
inside model-selection tooling).
"""

from __future__ import annotations

import numbers

from sklearn.base import BaseEstimator

from .corpus import Document, build_index, make_document, tokenize
from .errors import EmptyQueryError
from .params import make_config
from .querydensity import density_from_summaries, finalize_query_density
from .retrieval import DEFAULT_CANDIDATES, RankedList, first_pass, rerank
from .sweep import SweepEngine, SweepSettings
from .termdensity import DEFAULT_RANK_CAP, DEFAULT_SAMPLE_SIZE


def _as_documents(X) -> list[Document]:
    documents = []
    for i, item in enumerate(X):
        if isinstance(item, Document):
            documents.append(item)
        elif isinstance(item, dict):
            if "paragraphs" in item:
                documents.append(make_document(item["id"], item["paragraphs"]))
            else:
                documents.append(make_document(item["id"], [item.get("text", "")]))
        elif isinstance(item, str):
            documents.append(make_document(f"d{i}", [item]))
        else:
            raise TypeError(
                "fit expects Document objects, {'id', 'paragraphs'/'text'} "
                f"dicts, or strings; got {type(item).__name__}"
            )
    return documents


def _check_positive_int(name: str, value) -> int:
    if not isinstance(value, numbers.Integral) or value < 1:
        raise ValueError(f"{name} must be a positive integer, got {value!r}")
    return int(value)


class SubspaceRetriever(BaseEstimator):
    """Rank documents by the probability a query density assigns to
    each document's fragment subspace, after a BM25 first pass.

    Parameters mirror the experiment grid: fragment granularity,
    document/query weighting schemes, document/query dimension rules,
    query term weighting, and the query construction.
    """

    def __init__(
        self,
        fragment: str = "sentence",
        doc_weighting: str = "tf",
        query_weighting: str = "tfidf",
        doc_dim: str = "all",
        query_dim: str = "all",
        term_weight: str = "idf",
        construction: str = "mixture",
        candidates: int = DEFAULT_CANDIDATES,
        rank_cap: int = DEFAULT_RANK_CAP,
        sample_size: int = DEFAULT_SAMPLE_SIZE,
        seed: int = 0,
    ):
        self.fragment = fragment
        self.doc_weighting = doc_weighting
        self.query_weighting = query_weighting
        self.doc_dim = doc_dim
        self.query_dim = query_dim
        self.term_weight = term_weight
        self.construction = construction
        self.candidates = candidates
        self.rank_cap = rank_cap
        self.sample_size = sample_size
        self.seed = seed

    def fit(self, X, y=None):
        """Index the documents and prepare the shared caches; term
        densities are built lazily at query time."""
        self.config_ = make_config(
            fragment=self.fragment,
            doc_weighting=self.doc_weighting,
            query_weighting=self.query_weighting,
            doc_dim=self.doc_dim,
            query_dim=self.query_dim,
            term_weight=self.term_weight,
            construction=self.construction,
        )
        settings = SweepSettings(
            candidates=_check_positive_int("candidates", self.candidates),
            rank_cap=_check_positive_int("rank_cap", self.rank_cap),
            sample_size=_check_positive_int("sample_size", self.sample_size),
            seed=int(self.seed),
        )
        self.index_ = build_index(_as_documents(X))
        self.engine_ = SweepEngine(self.index_, settings)
        return self

    def _check_fitted(self) -> None:
        if not hasattr(self, "index_"):
            raise RuntimeError("this SubspaceRetriever instance is not fitted yet")

    def query_density(self, query: str):
        """The finalized density for a free-text query."""
        self._check_fitted()
        tokens = tokenize(query)
        config = self.config_
        summaries = {}
        for term in dict.fromkeys(tokens):
            summary = self.engine_.term_summary(
                term, config.fragment, config.query_weighting
            )
            if summary is not None:
                summaries[term] = summary
        known = [t for t in tokens if t in summaries]
        if not known:
            raise EmptyQueryError(f"no usable term in query {query!r}")
        qd = density_from_summaries(
            known, summaries, config.term_weight, config.construction, self.index_.vocab
        )
        return finalize_query_density(qd, config.query_dim)

    def rank(self, query: str, topic_id: str = "") -> RankedList:
        """BM25 candidates re-ranked by the trace score."""
        self._check_fitted()
        tokens = tokenize(query)
        candidates = first_pass(
            tokens, self.index_, topic_id, k=self.engine_.settings.candidates
        )
        if not candidates.entries:
            return candidates
        qd = self.query_density(query)
        return rerank(candidates, qd, self.config_, self.index_, self.engine_.builder)

    def transform(self, X) -> list[RankedList]:
        """Ranked list per query string."""
        return [self.rank(query, topic_id=str(i)) for i, query in enumerate(X)]

    def predict(self, X) -> list[str]:
        """Top-ranked document id per query, or "" when nothing
        matches."""
        out = []
        for ranked in self.transform(X):
            out.append(ranked.entries[0][0] if ranked.entries else "")
        return out
