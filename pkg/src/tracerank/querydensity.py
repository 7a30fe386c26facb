"""Query densities from per-term summaries.

Two constructions: a mixture sum_t w_t rho_t, and a mixture of
superpositions that averages outer products of one fragment vector per
query term, each scaled by sqrt(w_t / N_t).  The latter is evaluated in
closed form rather than by enumerating all prod N_t combinations:

    A = sum_i (w_i / N_i) rho_i
      + sum_{i != j} sqrt(w_i w_j / (N_i N_j)) m_i m_j^T

with m_i the exact mean fragment vector.  The enumerated sum equals
(prod_k N_k) * A, so normalizing A's trace yields the same density; the
equivalence is oracle-tested against direct enumeration.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace

import numpy as np

from .corpus import VocabularyStats, idf
from .docspace import select_dimension
from .errors import DegenerateDensityError, EmptyQueryError
from .linalg import (
    EIG_FLOOR,
    LowRankDensity,
    SparseVector,
    _orthonormalize,
    normalize_trace,
    stack_dense,
)
from .params import ParamConfig
from .termdensity import TermDensityStore, TermDensitySummary

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class QueryDensity:
    density: LowRankDensity
    terms: tuple[str, ...]
    construction: str
    z_q: float | None = None


def term_weights(terms, mode: str, stats: VocabularyStats) -> list[tuple[str, float]]:
    """Normalized per-term weights; duplicate terms merge with their
    multiplicity folded in.  Under idf weighting a query whose terms
    all have zero idf falls back to uniform."""
    if not terms:
        raise EmptyQueryError("no query terms to weight")
    counts: dict[str, int] = {}
    for term in terms:
        counts[term] = counts.get(term, 0) + 1
    if mode == "uniform":
        raw = {term: float(count) for term, count in counts.items()}
    elif mode == "idf":
        raw = {term: count * idf(term, stats) for term, count in counts.items()}
        if sum(raw.values()) == 0.0:
            raw = {term: float(count) for term, count in counts.items()}
    else:
        raise ValueError(f"unknown term weight mode: {mode!r}")
    total = sum(raw.values())
    return [(term, weight / total) for term, weight in raw.items()]


def _assemble(summaries, include_means: bool):
    """Dense stack of all summary eigenvectors (and means), an
    orthonormal basis of their joint span, and per-summary row slices."""
    vectors: list[SparseVector] = []
    slices = []
    mean_rows = []
    for summary in summaries:
        start = len(vectors)
        vectors.extend(summary.vectors)
        slices.append((start, len(vectors)))
        if include_means:
            mean_rows.append(len(vectors))
            vectors.append(summary.mean_vector)
    X, union = stack_dense(vectors)
    basis, _ = _orthonormalize(X)
    coords = X @ basis.T
    return coords, basis, union, slices, mean_rows


def _density_from_operator(op: np.ndarray, basis: np.ndarray, union: np.ndarray):
    """Eigendecompose a small symmetric operator expressed in an
    orthonormal basis; map eigenvectors back to term space.  Returns
    descending eigenpairs above the floor (tiny negatives dropped) and
    the operator trace."""
    trace = float(np.trace(op))
    evals, evecs = np.linalg.eigh(op)
    order = np.argsort(evals)[::-1]
    evals, evecs = evals[order], evecs[:, order]
    keep = evals > EIG_FLOOR
    evals, evecs = evals[keep], evecs[:, keep]
    if evals.size == 0:
        raise DegenerateDensityError("query density has no mass above the floor")
    rows = evecs.T @ basis
    vectors = [SparseVector(union, row) for row in rows]
    return evals, vectors, trace


def mixture_density(summaries, weights) -> QueryDensity:
    """Eq-3-style construction: the weighted sum of term densities,
    eigensolved in the joint span of their eigenvectors."""
    summaries, w = list(summaries), np.asarray(weights, dtype=np.float64)
    coords, basis, union, _, _ = _assemble(summaries, include_means=False)
    coeffs = np.concatenate(
        [w[i] * s.eigenvalues for i, s in enumerate(summaries)]
    )
    op = (coords * coeffs[:, None]).T @ coords
    evals, vectors, _ = _density_from_operator(op, basis, union)
    return QueryDensity(
        density=normalize_trace(evals, vectors),
        terms=tuple(s.term for s in summaries),
        construction="mixture",
    )


def superposition_mixture_density(summaries, weights) -> QueryDensity:
    """Closed form of the mixture-of-superpositions construction (see
    module docstring); Z_q is the trace of the enumerated sum."""
    summaries, w = list(summaries), np.asarray(weights, dtype=np.float64)
    n_vectors = np.asarray([s.n_vectors for s in summaries], dtype=np.float64)
    coords, basis, union, slices, mean_rows = _assemble(summaries, include_means=True)

    coeffs = np.zeros(coords.shape[0])
    for i, summary in enumerate(summaries):
        start, stop = slices[i]
        coeffs[start:stop] = (w[i] / n_vectors[i]) * summary.eigenvalues
    op = (coords * coeffs[:, None]).T @ coords

    amplitudes = np.sqrt(w / n_vectors)
    means = coords[mean_rows]
    cross = np.outer(amplitudes, amplitudes)
    np.fill_diagonal(cross, 0.0)
    op += means.T @ cross @ means

    evals, vectors, trace = _density_from_operator(op, basis, union)
    z_q = float(np.prod(n_vectors)) * trace
    return QueryDensity(
        density=normalize_trace(evals, vectors),
        terms=tuple(s.term for s in summaries),
        construction="superposition",
        z_q=z_q,
    )


def finalize_query_density(qd: QueryDensity, rule: str) -> QueryDensity:
    """Apply query-side dimension selection, then renormalize."""
    density = qd.density
    k = select_dimension(density.eigenvalues, rule)
    truncated = normalize_trace(density.eigenvalues[:k], density.vectors[:k])
    return replace(qd, density=truncated)


def density_from_summaries(
    tokens,
    summaries_by_term: dict[str, TermDensitySummary],
    term_weight: str,
    construction: str,
    stats: VocabularyStats,
) -> QueryDensity:
    """Weight the known tokens and construct the (pre-selection) query
    density; unknown tokens must already be filtered out."""
    weighted = term_weights(tokens, term_weight, stats)
    summaries = [summaries_by_term[term] for term, _ in weighted]
    weights = [weight for _, weight in weighted]
    if construction == "mixture":
        return mixture_density(summaries, weights)
    if construction == "superposition":
        return superposition_mixture_density(summaries, weights)
    raise ValueError(f"unknown construction: {construction!r}")


def build_query_density(
    tokens,
    store: TermDensityStore,
    stats: VocabularyStats,
    config: ParamConfig,
) -> QueryDensity:
    """Full query-side pipeline: drop unknown terms, weight, construct
    per the configuration, select dimensions."""
    known = [t for t in tokens if t in store]
    dropped = sorted(set(tokens) - set(known))
    if dropped:
        logger.warning("dropping query terms with no density: %s", ", ".join(dropped))
    if not known:
        raise EmptyQueryError("no query term has a stored density")
    summaries_by_term = {term: store.get(term) for term in known}
    qd = density_from_summaries(
        known, summaries_by_term, config.term_weight, config.construction, stats
    )
    return finalize_query_density(qd, config.query_dim)
