"""Per-term densities: build, sample, persist, load.

The density of a term averages the outer products of all fragment
vectors whose fragment contains the term, over a capped document
sample.  Densities are stored rank-capped and trace-renormalized, next
to the exact mean fragment vector and vector count that the
superposition construction needs.
"""

from __future__ import annotations

import hashlib
import json
import random
import struct
from dataclasses import dataclass

import numpy as np

from .corpus import CorpusIndex, VocabularyStats
from .docspace import fragment_vector
from .errors import DegenerateTermError, StoreFormatError, StoreMismatchError, UnknownTermError
from .linalg import IncrementalScatter, SparseVector, normalize_trace

STORE_MAGIC = b"TDNS"
STORE_VERSION = 1

DEFAULT_RANK_CAP = 10
DEFAULT_SAMPLE_SIZE = 10_000


@dataclass(frozen=True)
class TermDensitySummary:
    term: str
    term_id: int
    eigenvalues: np.ndarray
    vectors: tuple[SparseVector, ...]
    mean_vector: SparseVector
    n_vectors: int
    df: int

    @property
    def rank(self) -> int:
        return len(self.vectors)


def vocabulary_hash(stats: VocabularyStats) -> str:
    digest = hashlib.sha256()
    digest.update(str(stats.corpus_size).encode())
    for term in stats.terms:
        digest.update(b"\x00")
        digest.update(term.encode("utf-8"))
    return digest.hexdigest()


def sample_documents(term_id: int, postings, max_docs: int, seed: int) -> list[int]:
    """Document positions holding the term; a uniform sample without
    replacement when the document frequency exceeds ``max_docs``.  The
    generator is seeded per term so builds are order-independent."""
    positions = [int(p) for p in postings[term_id][0]]
    if len(positions) <= max_docs:
        return positions
    rng = random.Random(f"{seed}:{term_id}")
    return sorted(rng.sample(positions, max_docs))


def build_term_density(
    term: str,
    index: CorpusIndex,
    granularity: str,
    scheme: str,
    max_rank: int = DEFAULT_RANK_CAP,
    max_docs: int = DEFAULT_SAMPLE_SIZE,
    seed: int = 0,
) -> TermDensitySummary:
    """Density of Eq-style averaging over the fragments containing the
    term, at the given granularity and weighting scheme."""
    stats = index.vocab
    tid = stats.term_ids.get(term)
    if tid is None:
        raise UnknownTermError(term)
    acc = IncrementalScatter(max_rank)
    for pos in sample_documents(tid, index.postings, max_docs, seed):
        for fragment in index.fragments[granularity][pos]:
            if term not in fragment.tokens:
                continue
            vec = fragment_vector(fragment, scheme, stats)
            if vec is not None:
                acc.push(vec)
    evals, vectors, _, mean, count = acc.result()
    if count == 0 or evals.size == 0:
        raise DegenerateTermError(term)
    # incremental eigenvalues sum to the (possibly truncated) scatter
    # trace; dividing by the sum makes the stored object a density
    density = normalize_trace(evals, vectors)
    return TermDensitySummary(
        term=term,
        term_id=tid,
        eigenvalues=density.eigenvalues,
        vectors=density.vectors,
        mean_vector=mean,
        n_vectors=count,
        df=int(stats.doc_frequency[tid]),
    )


@dataclass(frozen=True)
class StoreHeader:
    vocab_hash: str
    granularity: str
    scheme: str
    max_rank: int
    max_docs: int
    seed: int
    term_count: int

    def as_dict(self) -> dict:
        return {
            "version": STORE_VERSION,
            "vocab_hash": self.vocab_hash,
            "granularity": self.granularity,
            "scheme": self.scheme,
            "max_rank": self.max_rank,
            "max_docs": self.max_docs,
            "seed": self.seed,
            "term_count": self.term_count,
        }


class TermDensityStore:
    """Immutable mapping term -> TermDensitySummary plus the build
    parameters recorded at creation time."""

    def __init__(self, header: StoreHeader, summaries: dict[str, TermDensitySummary]):
        self.header = header
        self._summaries = dict(summaries)

    def __len__(self) -> int:
        return len(self._summaries)

    def __contains__(self, term: str) -> bool:
        return term in self._summaries

    def get(self, term: str) -> TermDensitySummary | None:
        return self._summaries.get(term)

    def terms(self) -> list[str]:
        return sorted(self._summaries)

    def ensure_compatible(self, vocab_hash: str, granularity: str, scheme: str) -> None:
        expected = (vocab_hash, granularity, scheme)
        actual = (self.header.vocab_hash, self.header.granularity, self.header.scheme)
        if expected != actual:
            raise StoreMismatchError(
                "store was built with different parameters: "
                f"expected (vocab, granularity, scheme) = {expected}, found {actual}"
            )


def _pack_sparse(vec: SparseVector) -> bytes:
    parts = [struct.pack("<I", len(vec.ids))]
    parts.append(vec.ids.astype("<i8").tobytes())
    parts.append(vec.weights.astype("<f8").tobytes())
    return b"".join(parts)


def _read_exact(handle, size: int) -> bytes:
    data = handle.read(size)
    if len(data) != size:
        raise StoreFormatError("unexpected end of store file")
    return data


def _unpack_sparse(handle) -> SparseVector:
    (nnz,) = struct.unpack("<I", _read_exact(handle, 4))
    ids = np.frombuffer(_read_exact(handle, 8 * nnz), dtype="<i8")
    weights = np.frombuffer(_read_exact(handle, 8 * nnz), dtype="<f8")
    return SparseVector(ids, weights)


def persist_store(store: TermDensityStore, path) -> None:
    header = store.header.as_dict()
    header["term_count"] = len(store)
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as handle:
        handle.write(STORE_MAGIC)
        handle.write(struct.pack("<I", STORE_VERSION))
        handle.write(struct.pack("<I", len(header_bytes)))
        handle.write(header_bytes)
        for term in store.terms():
            summary = store.get(term)
            term_bytes = term.encode("utf-8")
            handle.write(struct.pack("<I", len(term_bytes)))
            handle.write(term_bytes)
            handle.write(
                struct.pack(
                    "<qqqI",
                    summary.term_id,
                    summary.df,
                    summary.n_vectors,
                    summary.rank,
                )
            )
            handle.write(summary.eigenvalues.astype("<f8").tobytes())
            for vec in summary.vectors:
                handle.write(_pack_sparse(vec))
            handle.write(_pack_sparse(summary.mean_vector))


def load_store(path) -> TermDensityStore:
    with open(path, "rb") as handle:
        magic = handle.read(len(STORE_MAGIC))
        if magic != STORE_MAGIC:
            raise StoreFormatError(f"{path}: not a term-density store")
        (version,) = struct.unpack("<I", _read_exact(handle, 4))
        if version != STORE_VERSION:
            raise StoreFormatError(
                f"{path}: store version {version} unsupported (expected {STORE_VERSION})"
            )
        (header_len,) = struct.unpack("<I", _read_exact(handle, 4))
        try:
            raw = json.loads(_read_exact(handle, header_len))
        except json.JSONDecodeError as exc:
            raise StoreFormatError(f"{path}: corrupt store header: {exc}") from None
        header = StoreHeader(
            vocab_hash=raw["vocab_hash"],
            granularity=raw["granularity"],
            scheme=raw["scheme"],
            max_rank=int(raw["max_rank"]),
            max_docs=int(raw["max_docs"]),
            seed=int(raw["seed"]),
            term_count=int(raw["term_count"]),
        )
        summaries: dict[str, TermDensitySummary] = {}
        for _ in range(header.term_count):
            (term_len,) = struct.unpack("<I", _read_exact(handle, 4))
            term = _read_exact(handle, term_len).decode("utf-8")
            term_id, df, n_vectors, rank = struct.unpack("<qqqI", _read_exact(handle, 28))
            eigenvalues = np.frombuffer(_read_exact(handle, 8 * rank), dtype="<f8")
            vectors = tuple(_unpack_sparse(handle) for _ in range(rank))
            mean_vector = _unpack_sparse(handle)
            summaries[term] = TermDensitySummary(
                term=term,
                term_id=term_id,
                eigenvalues=eigenvalues.copy(),
                vectors=vectors,
                mean_vector=mean_vector,
                n_vectors=n_vectors,
                df=df,
            )
        if handle.read(1):
            raise StoreFormatError(f"{path}: trailing bytes after last record")
    return TermDensityStore(header, summaries)


def build_store(
    index: CorpusIndex,
    granularity: str,
    scheme: str,
    max_rank: int = DEFAULT_RANK_CAP,
    max_docs: int = DEFAULT_SAMPLE_SIZE,
    seed: int = 0,
    terms=None,
) -> TermDensityStore:
    """Build densities for ``terms`` (default: the whole vocabulary);
    degenerate terms are skipped."""
    stats = index.vocab
    wanted = stats.terms if terms is None else [t for t in terms if t in stats.term_ids]
    summaries: dict[str, TermDensitySummary] = {}
    for term in sorted(set(wanted)):
        try:
            summaries[term] = build_term_density(
                term, index, granularity, scheme, max_rank, max_docs, seed
            )
        except DegenerateTermError:
            continue
    header = StoreHeader(
        vocab_hash=vocabulary_hash(stats),
        granularity=granularity,
        scheme=scheme,
        max_rank=max_rank,
        max_docs=max_docs,
        seed=seed,
        term_count=len(summaries),
    )
    return TermDensityStore(header, summaries)
