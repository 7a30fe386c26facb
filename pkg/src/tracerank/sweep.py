"""Parameter sweep: every admissible configuration over a topic set.

The sweep shares work aggressively: BM25 candidates are fixed per
topic, document scatter decompositions are cached per (document,
granularity, scheme) and reused by every dimension rule, and term
densities are built once per (granularity, scheme) for the query terms
only.  Scoring stacks all candidate bases into one matrix per
(granularity, weighting) so each configuration costs one matrix
product plus prefix sums.
"""

from __future__ import annotations

import json
import multiprocessing
import os
from dataclasses import dataclass

import numpy as np

from .corpus import CorpusIndex, tokenize
from .docspace import SubspaceBuilder
from .errors import DegenerateDensityError, DegenerateTermError, EmptyQueryError
from .evaluation import Qrels, SweepResult, average_precision, significance_report
from .params import (
    CONSTRUCTIONS,
    DIM_RULES,
    FRAGMENTS,
    TERM_WEIGHTS,
    WEIGHTINGS,
    ParamConfig,
    enumerate_configs,
)
from .querydensity import density_from_summaries, finalize_query_density
from .retrieval import (
    DEFAULT_CANDIDATES,
    RankedList,
    _order_scores,
    first_pass,
    masses_to_scores,
    row_masses,
    stack_subspaces,
    write_run,
)
from .termdensity import (
    DEFAULT_RANK_CAP,
    DEFAULT_SAMPLE_SIZE,
    build_term_density,
)


@dataclass(frozen=True)
class SweepSettings:
    candidates: int = DEFAULT_CANDIDATES
    rank_cap: int = DEFAULT_RANK_CAP
    sample_size: int = DEFAULT_SAMPLE_SIZE
    seed: int = 0


class SweepEngine:
    """Caches shared across topics: subspace decompositions and
    per-term densities."""

    def __init__(self, index: CorpusIndex, settings: SweepSettings):
        self.index = index
        self.settings = settings
        self.builder = SubspaceBuilder(index)
        self._summaries: dict[tuple[str, str, str], object] = {}

    def term_summary(self, term: str, granularity: str, scheme: str):
        key = (term, granularity, scheme)
        if key not in self._summaries:
            if term not in self.index.vocab.term_ids:
                self._summaries[key] = None
            else:
                try:
                    self._summaries[key] = build_term_density(
                        term,
                        self.index,
                        granularity,
                        scheme,
                        max_rank=self.settings.rank_cap,
                        max_docs=self.settings.sample_size,
                        seed=self.settings.seed,
                    )
                except DegenerateTermError:
                    self._summaries[key] = None
        return self._summaries[key]

    def _query_support(self, tokens, granularity) -> np.ndarray:
        ids = [np.empty(0, dtype=np.int64)]
        for scheme in WEIGHTINGS:
            for term in dict.fromkeys(tokens):
                summary = self.term_summary(term, granularity, scheme)
                if summary is None:
                    continue
                ids.extend(v.ids for v in summary.vectors)
                ids.append(summary.mean_vector.ids)
        return np.unique(np.concatenate(ids))

    def topic_run(self, topic_id: str, query: str) -> dict[ParamConfig, RankedList]:
        """Ranked list for every admissible configuration."""
        tokens = tokenize(query)
        candidates = first_pass(
            tokens, self.index, topic_id, k=self.settings.candidates
        )
        out: dict[ParamConfig, RankedList] = {}
        doc_ids = candidates.doc_ids()
        zero_entries = tuple((doc_id, 0.0) for doc_id in sorted(doc_ids))
        positions = [self.index.positions[d] for d in doc_ids]

        for granularity in FRAGMENTS:
            doc_rules = ("highest",) if granularity == "document" else DIM_RULES
            tau = (
                self._query_support(tokens, granularity)
                if doc_ids
                else np.empty(0, dtype=np.int64)
            )
            stacked = {
                scheme: stack_subspaces(
                    [
                        self.builder.eigenpairs(pos, granularity, scheme)
                        for pos in positions
                    ],
                    tau,
                )
                for scheme in WEIGHTINGS
            }
            for query_weighting in WEIGHTINGS:
                summaries_by_term = {}
                for term in dict.fromkeys(tokens):
                    summary = self.term_summary(term, granularity, query_weighting)
                    if summary is not None:
                        summaries_by_term[term] = summary
                known = [t for t in tokens if t in summaries_by_term]
                for term_weight in TERM_WEIGHTS:
                    for construction in CONSTRUCTIONS:
                        base = self._build_density(
                            known, summaries_by_term, term_weight, construction
                        )
                        for query_dim in DIM_RULES:
                            masses_by_scheme = None
                            if base is not None:
                                final = finalize_query_density(base, query_dim)
                                masses_by_scheme = {
                                    scheme: row_masses(final.density, stacked[scheme])
                                    for scheme in WEIGHTINGS
                                }
                            for doc_weighting in WEIGHTINGS:
                                for doc_dim in doc_rules:
                                    config = ParamConfig(
                                        fragment=granularity,
                                        doc_weighting=doc_weighting,
                                        query_weighting=query_weighting,
                                        doc_dim=doc_dim,
                                        query_dim=query_dim,
                                        term_weight=term_weight,
                                        construction=construction,
                                    )
                                    if masses_by_scheme is None:
                                        out[config] = RankedList(topic_id, zero_entries)
                                        continue
                                    scores = masses_to_scores(
                                        masses_by_scheme[doc_weighting],
                                        stacked[doc_weighting],
                                        doc_dim,
                                    )
                                    entries = _order_scores(
                                        doc_ids, (float(s) for s in scores)
                                    )
                                    out[config] = RankedList(topic_id, tuple(entries))
        return out

    def _build_density(self, known, summaries_by_term, term_weight, construction):
        if not known:
            return None
        try:
            return density_from_summaries(
                known, summaries_by_term, term_weight, construction, self.index.vocab
            )
        except (EmptyQueryError, DegenerateDensityError):
            return None


_WORKER_ENGINE: SweepEngine | None = None


def _worker_init(index, settings):
    global _WORKER_ENGINE
    _WORKER_ENGINE = SweepEngine(index, settings)


def _worker_topic(args):
    topic_id, query = args
    return topic_id, _WORKER_ENGINE.topic_run(topic_id, query)


def run_sweep(
    index: CorpusIndex,
    topics,
    qrels: Qrels,
    settings: SweepSettings | None = None,
    jobs: int = 1,
) -> tuple[SweepResult, dict[ParamConfig, list[RankedList]]]:
    """Sweep all configurations over the topics; returns per-(topic,
    config) AP plus every ranked list.  Topics without relevant
    documents are ranked but excluded from the AP table."""
    settings = settings or SweepSettings()
    configs = tuple(enumerate_configs())
    topic_order = [topic_id for topic_id, _ in topics]

    if jobs > 1 and len(topics) > 1:
        with multiprocessing.Pool(
            processes=min(jobs, len(topics)),
            initializer=_worker_init,
            initargs=(index, settings),
        ) as pool:
            by_topic = dict(pool.map(_worker_topic, topics))
    else:
        engine = SweepEngine(index, settings)
        by_topic = {
            topic_id: engine.topic_run(topic_id, query) for topic_id, query in topics
        }

    eval_topics = tuple(
        t
        for t in topic_order
        if t in qrels.grades and qrels.relevant_count(t) > 0
    )
    ap: dict[tuple[str, ParamConfig], float] = {}
    runs: dict[ParamConfig, list[RankedList]] = {c: [] for c in configs}
    for topic_id in topic_order:
        per_config = by_topic[topic_id]
        for config in configs:
            ranked = per_config[config]
            runs[config].append(ranked)
            if topic_id in eval_topics:
                ap[(topic_id, config)] = average_precision(ranked, qrels)
    results = SweepResult(topics=eval_topics, configs=configs, ap=ap)
    return results, runs


def config_map(results: SweepResult, config: ParamConfig) -> float:
    return float(
        np.mean([results.ap[(topic, config)] for topic in results.topics])
    )


def best_config(results: SweepResult) -> tuple[ParamConfig, float]:
    """Configuration with the highest mean AP; ties break on the
    enumeration order."""
    best = max(
        enumerate(results.configs),
        key=lambda pair: (config_map(results, pair[1]), -pair[0]),
    )[1]
    return best, config_map(results, best)


def random_baseline_map(
    index: CorpusIndex,
    topics,
    qrels: Qrels,
    n_seeds: int = 20,
    k: int = DEFAULT_CANDIDATES,
    seed: int = 0,
) -> float:
    """Mean AP of uniformly shuffled BM25 candidate lists, averaged
    over ``n_seeds`` shuffles."""
    candidate_lists = []
    for topic_id, query in topics:
        if topic_id not in qrels.grades or qrels.relevant_count(topic_id) == 0:
            continue
        candidate_lists.append(first_pass(tokenize(query), index, topic_id, k=k))
    maps = []
    for offset in range(n_seeds):
        rng = np.random.default_rng(seed + offset)
        aps = []
        for ranked in candidate_lists:
            doc_ids = ranked.doc_ids()
            order = rng.permutation(len(doc_ids))
            shuffled = RankedList(
                ranked.topic_id,
                tuple((doc_ids[int(i)], 0.0) for i in order),
            )
            aps.append(average_precision(shuffled, qrels))
        maps.append(float(np.mean(aps)) if aps else 0.0)
    return float(np.mean(maps))


def write_sweep_outputs(results: SweepResult, runs, out_dir, tag: str = "tracerank") -> None:
    """results.jsonl (one topic/config/AP triple per line), report.txt
    (the seven-row significance table), and one run file per
    configuration under runs/."""
    os.makedirs(out_dir, exist_ok=True)
    results_path = os.path.join(out_dir, "results.jsonl")
    with open(results_path, "w", encoding="utf-8") as handle:
        for topic_id in results.topics:
            for config in results.configs:
                line = {
                    "topic": topic_id,
                    "config": config.as_dict(),
                    "ap": results.ap[(topic_id, config)],
                }
                handle.write(json.dumps(line, sort_keys=True) + "\n")
    with open(os.path.join(out_dir, "report.txt"), "w", encoding="utf-8") as handle:
        handle.write(significance_report(results))
    runs_dir = os.path.join(out_dir, "runs")
    os.makedirs(runs_dir, exist_ok=True)
    for config, ranked_lists in runs.items():
        path = os.path.join(runs_dir, f"{config.key()}.run")
        write_run(ranked_lists, tag, path)
