"""Experiment parameters: the seven-way configuration grid.

A configuration fixes fragment granularity, document and query
weighting schemes, document and query dimension rules, the query term
weight mode, and the query construction.  Document granularity yields a
one-dimensional subspace, so its dimension rule is collapsed to a
single canonical value; the full grid therefore has 756 entries, not
972.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from itertools import product

FRAGMENTS = ("document", "paragraph", "sentence")
WEIGHTINGS = ("tfidf", "tf", "binary")
DIM_RULES = ("highest", "mean", "all")
TERM_WEIGHTS = ("uniform", "idf")
CONSTRUCTIONS = ("mixture", "superposition")

# (field, admissible values, report label) in report row order
PARAM_FIELDS = (
    ("fragment", FRAGMENTS, "fragment granularity"),
    ("doc_weighting", WEIGHTINGS, "document weighting"),
    ("query_weighting", WEIGHTINGS, "query weighting"),
    ("doc_dim", DIM_RULES, "document dimension"),
    ("query_dim", DIM_RULES, "query dimension"),
    ("term_weight", TERM_WEIGHTS, "query term weight"),
    ("construction", CONSTRUCTIONS, "query construction"),
)


@dataclass(frozen=True, order=True)
class ParamConfig:
    fragment: str = "sentence"
    doc_weighting: str = "tf"
    query_weighting: str = "tfidf"
    doc_dim: str = "all"
    query_dim: str = "all"
    term_weight: str = "idf"
    construction: str = "mixture"

    def key(self) -> str:
        return "-".join(self.values())

    def values(self) -> tuple[str, ...]:
        return tuple(getattr(self, field) for field, _, _ in PARAM_FIELDS)

    def as_dict(self) -> dict[str, str]:
        return {field: getattr(self, field) for field, _, _ in PARAM_FIELDS}


def make_config(**kwargs) -> ParamConfig:
    """Validated configuration; a document-granularity config has its
    document dimension rule forced to "highest" (the subspace is
    one-dimensional, all rules coincide)."""
    config = ParamConfig(**kwargs)
    for field, values, _ in PARAM_FIELDS:
        value = getattr(config, field)
        if value not in values:
            raise ValueError(
                f"{field} must be one of {values}, got {value!r}"
            )
    if config.fragment == "document" and config.doc_dim != "highest":
        config = replace(config, doc_dim="highest")
    return config


def enumerate_configs() -> list[ParamConfig]:
    """All 756 admissible configurations in deterministic order."""
    configs = []
    for values in product(*(values for _, values, _ in PARAM_FIELDS)):
        config = ParamConfig(*values)
        if config.fragment == "document" and config.doc_dim != "highest":
            continue
        configs.append(config)
    return configs
