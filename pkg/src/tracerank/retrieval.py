"""First-pass BM25 retrieval, trace re-ranking, TREC run files."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .corpus import CorpusIndex
from .docspace import SubspaceBuilder, select_dimension
from .errors import EvaluationError
from .linalg import LowRankDensity
from .params import ParamConfig
from .querydensity import QueryDensity

BM25_K1 = 1.2
BM25_B = 0.75
DEFAULT_CANDIDATES = 1500


@dataclass(frozen=True)
class RankedList:
    topic_id: str
    entries: tuple[tuple[str, float], ...]

    def doc_ids(self) -> list[str]:
        return [doc_id for doc_id, _ in self.entries]

    def __len__(self) -> int:
        return len(self.entries)


def rsj_idf(df: int, n_docs: int) -> float:
    """Robertson-Sparck Jones idf, floored at 0."""
    return max(0.0, math.log((n_docs - df + 0.5) / (df + 0.5)))


def bm25_scores(tokens, index: CorpusIndex) -> tuple[np.ndarray, np.ndarray]:
    """BM25 score per document position for the given query tokens,
    plus a mask of documents containing at least one query term."""
    n = index.n_documents
    scores = np.zeros(n)
    matched = np.zeros(n, dtype=bool)
    if n == 0:
        return scores, matched
    avgdl = float(np.mean(index.doc_lengths))
    if avgdl == 0.0:
        avgdl = 1.0
    norm = 1.0 - BM25_B + BM25_B * index.doc_lengths / avgdl
    for token in tokens:
        tid = index.vocab.term_ids.get(token)
        if tid is None:
            continue
        docs, tfs = index.postings[tid]
        matched[docs] = True
        weight = rsj_idf(int(index.vocab.doc_frequency[tid]), n)
        tf = tfs.astype(np.float64)
        scores[docs] += weight * tf * (BM25_K1 + 1.0) / (tf + BM25_K1 * norm[docs])
    return scores, matched


def _order_scores(doc_ids, scores) -> list[tuple[str, float]]:
    return sorted(zip(doc_ids, scores), key=lambda pair: (-pair[1], pair[0]))


def first_pass(
    tokens, index: CorpusIndex, topic_id: str = "", k: int = DEFAULT_CANDIDATES
) -> RankedList:
    """Top-k documents containing at least one query term, by BM25
    score, ties broken by ascending document id."""
    scores, matched = bm25_scores(tokens, index)
    positions = np.flatnonzero(matched)
    ranked = _order_scores(
        (index.doc_ids[p] for p in positions), (float(scores[p]) for p in positions)
    )
    return RankedList(topic_id=topic_id, entries=tuple(ranked[:k]))


@dataclass(frozen=True)
class StackedSubspaces:
    """Candidate subspace bases stacked over a fixed term support.

    ``rows`` holds every basis vector restricted to the support columns
    ``tau``; document i owns rows offsets[i]:offsets[i+1], in
    descending-eigenvalue order, so a dimension rule reduces to a
    per-document prefix length.
    """

    tau: np.ndarray
    rows: np.ndarray
    offsets: np.ndarray
    full_ranks: np.ndarray
    mean_ranks: np.ndarray

    def prefix_lengths(self, rule: str) -> np.ndarray:
        if rule == "all":
            return self.full_ranks
        if rule == "highest":
            return np.minimum(self.full_ranks, 1)
        if rule == "mean":
            return self.mean_ranks
        raise ValueError(f"unknown dimension rule: {rule!r}")


def restrict_rows(vectors, tau: np.ndarray) -> np.ndarray:
    """Dense matrix of sparse vectors keeping only the ``tau`` columns."""
    out = np.zeros((len(vectors), len(tau)))
    if len(tau) == 0:
        return out
    for row, vec in enumerate(vectors):
        if len(vec.ids) == 0:
            continue
        positions = np.searchsorted(tau, vec.ids)
        positions = np.clip(positions, 0, len(tau) - 1)
        hit = tau[positions] == vec.ids
        out[row, positions[hit]] = vec.weights[hit]
    return out


def stack_subspaces(eigenpairs_list, tau: np.ndarray) -> StackedSubspaces:
    """Stack per-document (eigenvalues, basis) pairs for scoring
    against densities supported on ``tau``."""
    all_vectors = []
    full_ranks = []
    mean_ranks = []
    for evals, basis in eigenpairs_list:
        all_vectors.extend(basis)
        full_ranks.append(len(basis))
        mean_ranks.append(select_dimension(evals, "mean") if len(basis) else 0)
    full_ranks = np.asarray(full_ranks, dtype=np.int64)
    offsets = np.concatenate([[0], np.cumsum(full_ranks)])
    return StackedSubspaces(
        tau=tau,
        rows=restrict_rows(all_vectors, tau),
        offsets=offsets,
        full_ranks=full_ranks,
        mean_ranks=np.asarray(mean_ranks, dtype=np.int64),
    )


def row_masses(density: LowRankDensity, stacked: StackedSubspaces) -> np.ndarray:
    """lambda-weighted squared overlaps of the density's eigenbasis
    with every stacked basis row: mass_r = sum_i lambda_i (v_i . u_r)^2."""
    if stacked.rows.shape[0] == 0 or density.rank == 0:
        return np.zeros(stacked.rows.shape[0])
    V = restrict_rows(density.vectors, stacked.tau)
    overlap = V @ stacked.rows.T
    return density.eigenvalues @ (overlap * overlap)


def masses_to_scores(
    masses: np.ndarray, stacked: StackedSubspaces, rule: str
) -> np.ndarray:
    """Per-document trace scores from row masses under a dimension
    rule, via prefix sums (robust to zero-rank documents)."""
    csum = np.concatenate([[0.0], np.cumsum(masses)])
    starts = stacked.offsets[:-1]
    lengths = stacked.prefix_lengths(rule)
    return csum[starts + lengths] - csum[starts]


def rerank(
    candidates: RankedList,
    qd: QueryDensity,
    config: ParamConfig,
    index: CorpusIndex,
    builder: SubspaceBuilder | None = None,
) -> RankedList:
    """Re-rank BM25 candidates purely by tr(rho_q S_d); documents with
    a zero projector score 0 and fall to the bottom, ties broken by
    ascending document id."""
    if builder is None:
        builder = SubspaceBuilder(index)
    positions = [index.positions[doc_id] for doc_id, _ in candidates.entries]
    eigenpairs = [
        builder.eigenpairs(pos, config.fragment, config.doc_weighting)
        for pos in positions
    ]
    density = qd.density
    tau = (
        np.unique(np.concatenate([v.ids for v in density.vectors]))
        if density.rank
        else np.empty(0, dtype=np.int64)
    )
    stacked = stack_subspaces(eigenpairs, tau)
    masses = row_masses(density, stacked)
    scores = masses_to_scores(masses, stacked, config.doc_dim)
    ranked = _order_scores(candidates.doc_ids(), (float(s) for s in scores))
    return RankedList(topic_id=candidates.topic_id, entries=tuple(ranked))


def write_run(ranked_lists, tag: str, path) -> None:
    """TREC run lines: "topic Q0 doc rank score tag", scores with six
    decimal places."""
    if isinstance(ranked_lists, RankedList):
        ranked_lists = [ranked_lists]
    try:
        with open(path, "w", encoding="utf-8") as handle:
            for ranked in ranked_lists:
                for rank, (doc_id, score) in enumerate(ranked.entries, start=1):
                    handle.write(
                        f"{ranked.topic_id} Q0 {doc_id} {rank} {score:.6f} {tag}\n"
                    )
    except OSError as exc:
        raise OSError(f"cannot write run file {path}: {exc}") from exc


def read_run(path) -> dict[str, RankedList]:
    """Parse a TREC run file back into per-topic ranked lists."""
    per_topic: dict[str, list[tuple[str, float]]] = {}
    with open(path, encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != 6:
                raise EvaluationError(
                    f"{path}:{lineno}: expected 6 fields, got {len(parts)}"
                )
            topic_id, _, doc_id, _, score, _ = parts
            per_topic.setdefault(topic_id, []).append((doc_id, float(score)))
    return {
        topic: RankedList(topic_id=topic, entries=tuple(entries))
        for topic, entries in per_topic.items()
    }
