"""Corpus ingestion, segmentation, and vocabulary statistics.

Documents are ordered lists of paragraphs.  Fragments are extracted at
three granularities (whole document, paragraph, sentence); tokens are
lowercased, stopped against the SMART list, then Porter-stemmed.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import CorpusError
from ._stopwords import STOPWORDS
from .stemmer import stem

GRANULARITIES = ("document", "paragraph", "sentence")

_TOKEN_RE = re.compile(r"[^\W_]+")
_SENTENCE_END_RE = re.compile(r"[.!?]+")
_PARAGRAPH_SPLIT_RE = re.compile(r"\n\s*\n")

# Guard list for the sentence splitter: a trailing period after one of
# these does not end a sentence.
_ABBREVIATIONS = frozenset(
    "mr mrs ms dr prof rev st no vs etc fig vol al inc ltd jr sr cf ca "
    "approx dept univ e.g i.e".split()
)


@dataclass(frozen=True)
class Document:
    doc_id: str
    paragraphs: tuple[str, ...]


@dataclass(frozen=True)
class Fragment:
    doc_id: str
    ordinal: int
    tokens: tuple[str, ...]


@dataclass(frozen=True)
class VocabularyStats:
    terms: tuple[str, ...]
    term_ids: dict[str, int]
    doc_frequency: np.ndarray
    corpus_size: int

    def __len__(self) -> int:
        return len(self.terms)


@dataclass(frozen=True)
class CorpusIndex:
    """Immutable index over a document collection.

    ``fragments[granularity][i]`` holds the fragments of document i,
    ``postings[t]`` is a pair of aligned arrays (doc positions, term
    frequencies) sorted by position.
    """

    documents: tuple[Document, ...]
    doc_ids: tuple[str, ...]
    vocab: VocabularyStats
    fragments: dict[str, tuple[tuple[Fragment, ...], ...]]
    postings: tuple[tuple[np.ndarray, np.ndarray], ...]
    doc_lengths: np.ndarray

    @property
    def n_documents(self) -> int:
        return len(self.documents)

    @cached_property
    def positions(self) -> dict[str, int]:
        return {doc_id: i for i, doc_id in enumerate(self.doc_ids)}


def tokenize(text: str) -> list[str]:
    """Lowercase, strip punctuation, drop stop-words, Porter-stem."""
    out = []
    for raw in _TOKEN_RE.findall(text.lower()):
        if raw in STOPWORDS:
            continue
        out.append(stem(raw))
    return out


def _is_boundary(text: str, match: re.Match) -> bool:
    rest = text[match.end():]
    if rest.strip() == "":
        return True
    if not rest[0].isspace():
        return False
    nxt = rest.lstrip()
    if not nxt or not nxt[0].isupper():
        return False
    if "." in match.group():
        before = text[: match.start()].rsplit(None, 1)
        word = before[-1] if before else ""
        if (word + text[match.start(): match.end() - 1]).lower() in _ABBREVIATIONS:
            return False
    return True


def split_sentences(text: str) -> list[str]:
    """Rule-based splitter: '.', '!' or '?' followed by whitespace and
    an uppercase letter (or end of text), with an abbreviation guard."""
    pieces = []
    start = 0
    for match in _SENTENCE_END_RE.finditer(text):
        if _is_boundary(text, match):
            pieces.append(text[start: match.end()])
            start = match.end()
    if text[start:].strip():
        pieces.append(text[start:])
    return [p.strip() for p in pieces if p.strip()]


def make_document(doc_id: str, paragraphs) -> Document:
    if not isinstance(doc_id, str) or not doc_id.strip():
        raise CorpusError("document id must be a non-empty string")
    cleaned = tuple(p.strip() for p in paragraphs if p and p.strip())
    if not cleaned:
        raise CorpusError(f"document {doc_id!r} has no non-empty paragraph")
    return Document(doc_id=doc_id, paragraphs=cleaned)


def read_corpus(path) -> list[Document]:
    """Read a JSON-lines corpus.

    Each line is an object with "id" and either "paragraphs" (list of
    strings) or "text" (blank-line-separated paragraphs).
    """
    documents = []
    with open(path, encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"{path}:{lineno}: invalid JSON: {exc}") from None
            if not isinstance(obj, dict) or "id" not in obj:
                raise CorpusError(f"{path}:{lineno}: expected an object with an 'id' field")
            if "paragraphs" in obj:
                paragraphs = obj["paragraphs"]
                if not isinstance(paragraphs, list):
                    raise CorpusError(f"{path}:{lineno}: 'paragraphs' must be a list")
            elif "text" in obj:
                paragraphs = _PARAGRAPH_SPLIT_RE.split(obj["text"])
            else:
                raise CorpusError(f"{path}:{lineno}: need 'paragraphs' or 'text'")
            try:
                documents.append(make_document(obj["id"], paragraphs))
            except CorpusError as exc:
                raise CorpusError(f"{path}:{lineno}: {exc}") from None
    return documents


def read_topics(path) -> list[tuple[str, str]]:
    """Read tab-separated topics: one "topic_id<TAB>query text" per line."""
    topics = []
    with open(path, encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            if "\t" not in line:
                raise CorpusError(f"{path}:{lineno}: expected 'topic_id<TAB>query'")
            topic_id, query = line.split("\t", 1)
            topics.append((topic_id.strip(), query.strip()))
    return topics


def segment(doc: Document, granularity: str) -> list[Fragment]:
    """Fragments of ``doc`` at the given granularity; fragments with no
    surviving tokens are dropped."""
    if granularity not in GRANULARITIES:
        raise ValueError(f"unknown granularity: {granularity!r}")
    token_lists: list[list[str]]
    if granularity == "document":
        merged: list[str] = []
        for paragraph in doc.paragraphs:
            merged.extend(tokenize(paragraph))
        token_lists = [merged]
    elif granularity == "paragraph":
        token_lists = [tokenize(p) for p in doc.paragraphs]
    else:
        token_lists = []
        for paragraph in doc.paragraphs:
            token_lists.extend(tokenize(s) for s in split_sentences(paragraph))
    fragments = []
    for tokens in token_lists:
        if not tokens:
            continue
        fragments.append(
            Fragment(doc_id=doc.doc_id, ordinal=len(fragments), tokens=tuple(tokens))
        )
    return fragments


def build_index(documents, granularities=GRANULARITIES) -> CorpusIndex:
    """Index a collection: fragments per granularity, sorted vocabulary,
    postings with term frequencies, and document token lengths."""
    documents = tuple(documents)
    seen = set()
    for doc in documents:
        if doc.doc_id in seen:
            raise CorpusError(f"duplicate document id: {doc.doc_id!r}")
        seen.add(doc.doc_id)

    fragments: dict[str, list[tuple[Fragment, ...]]] = {g: [] for g in granularities}
    doc_term_counts: list[dict[str, int]] = []
    for doc in documents:
        for granularity in granularities:
            fragments[granularity].append(tuple(segment(doc, granularity)))
        counts: dict[str, int] = {}
        for paragraph in doc.paragraphs:
            for term in tokenize(paragraph):
                counts[term] = counts.get(term, 0) + 1
        doc_term_counts.append(counts)

    terms = tuple(sorted(set().union(*doc_term_counts))) if doc_term_counts else ()
    term_ids = {term: i for i, term in enumerate(terms)}

    doc_frequency = np.zeros(len(terms), dtype=np.int64)
    by_term: list[tuple[list[int], list[int]]] = [([], []) for _ in terms]
    for pos, counts in enumerate(doc_term_counts):
        for term, count in counts.items():
            tid = term_ids[term]
            doc_frequency[tid] += 1
            by_term[tid][0].append(pos)
            by_term[tid][1].append(count)
    postings = tuple(
        (np.asarray(docs, dtype=np.int64), np.asarray(tfs, dtype=np.int64))
        for docs, tfs in by_term
    )
    doc_lengths = np.asarray(
        [sum(counts.values()) for counts in doc_term_counts], dtype=np.int64
    )

    vocab = VocabularyStats(
        terms=terms,
        term_ids=term_ids,
        doc_frequency=doc_frequency,
        corpus_size=len(documents),
    )
    return CorpusIndex(
        documents=documents,
        doc_ids=tuple(doc.doc_id for doc in documents),
        vocab=vocab,
        fragments={g: tuple(fragments[g]) for g in granularities},
        postings=postings,
        doc_lengths=doc_lengths,
    )


def idf(term: str, stats: VocabularyStats) -> float:
    """Smoothed inverse document frequency ln((N+1)/(df+1)); unseen
    terms take df = 0."""
    tid = stats.term_ids.get(term)
    df = int(stats.doc_frequency[tid]) if tid is not None else 0
    return math.log((stats.corpus_size + 1) / (df + 1))
