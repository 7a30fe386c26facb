"""Average precision, sweep aggregation, paired significance tests.

The headline aggregate follows the means-of-medians convention: for a
parameter value, take each topic's median AP over the matching
configurations, then average the medians over topics.
"""

from __future__ import annotations

import math
import statistics
from dataclasses import dataclass

import numpy as np
from scipy.special import betainc

from .errors import EvaluationError
from .params import PARAM_FIELDS, ParamConfig
from .retrieval import RankedList

SIG_STRONG = 0.01
SIG_WEAK = 0.05


@dataclass(frozen=True)
class Qrels:
    """Binary relevance per (topic, document); graded input is
    binarized at grade >= 1."""

    grades: dict[str, dict[str, int]]

    def topics(self) -> list[str]:
        return sorted(self.grades)

    def is_relevant(self, topic_id: str, doc_id: str) -> bool:
        return self.grades.get(topic_id, {}).get(doc_id, 0) >= 1

    def relevant_count(self, topic_id: str) -> int:
        if topic_id not in self.grades:
            raise EvaluationError(f"topic {topic_id!r} absent from qrels")
        return sum(1 for g in self.grades[topic_id].values() if g >= 1)


def read_qrels(path) -> Qrels:
    """TREC qrels: "topic_id 0 doc_id grade", whitespace-separated."""
    grades: dict[str, dict[str, int]] = {}
    with open(path, encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != 4:
                raise EvaluationError(
                    f"{path}:{lineno}: expected 4 fields, got {len(parts)}"
                )
            topic_id, _, doc_id, grade = parts
            per_topic = grades.setdefault(topic_id, {})
            if doc_id in per_topic:
                raise EvaluationError(
                    f"{path}:{lineno}: duplicate qrels pair ({topic_id}, {doc_id})"
                )
            per_topic[doc_id] = int(grade)
    return Qrels(grades=grades)


def average_precision(ranked: RankedList, qrels: Qrels, topic_id: str | None = None) -> float:
    """AP = (1/R) sum of precision at each relevant rank; R counts all
    relevant documents for the topic, retrieved or not."""
    topic_id = ranked.topic_id if topic_id is None else topic_id
    relevant_total = qrels.relevant_count(topic_id)
    if relevant_total == 0:
        raise EvaluationError(f"topic {topic_id!r} has no relevant documents")
    hits = 0
    precision_sum = 0.0
    for rank, (doc_id, _) in enumerate(ranked.entries, start=1):
        if qrels.is_relevant(topic_id, doc_id):
            hits += 1
            precision_sum += hits / rank
    return precision_sum / relevant_total


def mean_average_precision(ranked_lists, qrels: Qrels) -> float:
    """Mean AP over the topics that have at least one relevant
    document; topics without relevant documents are excluded."""
    aps = []
    for ranked in ranked_lists:
        if ranked.topic_id not in qrels.grades:
            continue
        if qrels.relevant_count(ranked.topic_id) == 0:
            continue
        aps.append(average_precision(ranked, qrels))
    if not aps:
        raise EvaluationError("no evaluable topic in the run")
    return float(np.mean(aps))


def paired_t_test(a, b) -> tuple[float, float, int]:
    """Paired two-sided t-test: returns (t, p_two_sided, df).

    Differences with zero spread give t = 0, p = 1 when the mean is
    also zero, otherwise an infinite t with p = 0.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise EvaluationError("paired samples must have equal length")
    n = len(a)
    if n < 2:
        raise EvaluationError("paired t-test needs at least 2 pairs")
    d = a - b
    mean = float(np.mean(d))
    sd = float(np.std(d, ddof=1))
    df = n - 1
    if sd == 0.0:
        if mean == 0.0:
            return 0.0, 1.0, df
        return math.copysign(math.inf, mean), 0.0, df
    t = mean / (sd / math.sqrt(n))
    p_two = float(betainc(df / 2.0, 0.5, df / (df + t * t)))
    return t, p_two, df


@dataclass(frozen=True)
class SweepResult:
    """AP for every (topic, configuration) pair of a completed sweep."""

    topics: tuple[str, ...]
    configs: tuple[ParamConfig, ...]
    ap: dict[tuple[str, ParamConfig], float]

    def aps(self, topic_id: str, configs) -> list[float]:
        return [self.ap[(topic_id, config)] for config in configs]


def means_of_medians(results: SweepResult, parameter: str, value: str) -> float:
    """Per-topic median AP over the configurations where ``parameter``
    equals ``value``, averaged over topics."""
    matching = [c for c in results.configs if getattr(c, parameter) == value]
    if not matching:
        raise EvaluationError(f"no configuration with {parameter}={value!r}")
    medians = [
        statistics.median(results.aps(topic, matching)) for topic in results.topics
    ]
    if not medians:
        raise EvaluationError("sweep results contain no topics")
    return float(np.mean(medians))


def paired_samples(
    results: SweepResult, parameter: str, value_a: str, value_b: str
) -> tuple[list[float], list[float]]:
    """AP sample pairs matched on topic and on every other parameter."""
    rest = [field for field, _, _ in PARAM_FIELDS if field != parameter]
    buckets: dict[tuple, dict[str, float]] = {}
    for config in results.configs:
        value = getattr(config, parameter)
        if value not in (value_a, value_b):
            continue
        key_tail = tuple(getattr(config, field) for field in rest)
        for topic in results.topics:
            bucket = buckets.setdefault((topic, key_tail), {})
            bucket[value] = results.ap[(topic, config)]
    a, b = [], []
    for key in sorted(buckets):
        pair = buckets[key]
        if value_a in pair and value_b in pair:
            a.append(pair[value_a])
            b.append(pair[value_b])
    return a, b


def _marker(results: SweepResult, parameter: str, better: str, worse: str) -> str:
    """Significance marker for the directional claim better > worse:
    ">>" at 0.01, ">" at 0.05, "~" otherwise (one-sided)."""
    a, b = paired_samples(results, parameter, better, worse)
    if len(a) < 2:
        return "~"
    t, p_two, _ = paired_t_test(a, b)
    if t <= 0.0:
        return "~"
    p_one = p_two / 2.0
    if p_one <= SIG_STRONG:
        return ">>"
    if p_one <= SIG_WEAK:
        return ">"
    return "~"


def significance_report(results: SweepResult) -> str:
    """Plain-text report: one row per parameter, values ordered by
    means-of-medians with pairwise one-sided significance markers
    between neighbours."""
    lines = []
    for row, (field, values, label) in enumerate(PARAM_FIELDS, start=1):
        scored = sorted(
            ((means_of_medians(results, field, value), value) for value in values),
            key=lambda pair: (-pair[0], pair[1]),
        )
        cells = []
        for i, (mom, value) in enumerate(scored):
            if i > 0:
                cells.append(_marker(results, field, scored[i - 1][1], value))
            cells.append(f"{value} {mom:.4f}")
        lines.append(f"({row}) {label:<22} " + "  ".join(cells))
    return "\n".join(lines) + "\n"
