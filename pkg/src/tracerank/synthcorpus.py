"""Deterministic synthetic test collection with planted topical clusters.

Each cluster owns a small keyword vocabulary; its documents mix those
keywords with shared background words, and occasionally borrow a
keyword from another cluster so that first-pass candidate lists contain
non-relevant documents.  One topic per cluster queries its primary
keywords; qrels mark exactly the cluster's documents relevant.
"""

from __future__ import annotations

import json
import os
import random
from dataclasses import dataclass

from .corpus import Document
from .evaluation import Qrels
from ._stopwords import STOPWORDS
from .stemmer import stem

_CONSONANTS = "bcdfghjklmnpqrstvwz"
_VOWELS = "aeiou"

# per-word category probabilities inside a cluster document
P_OWN_KEYWORD = 0.32
P_FOREIGN_KEYWORD = 0.04


@dataclass(frozen=True)
class SyntheticCollection:
    documents: tuple[Document, ...]
    topics: tuple[tuple[str, str], ...]
    qrels: Qrels
    clusters: tuple[tuple[str, ...], ...]


def _make_word(rng: random.Random, taken_stems: set[str]) -> str:
    while True:
        word = "".join(
            rng.choice(_CONSONANTS) + rng.choice(_VOWELS)
            for _ in range(rng.randint(2, 4))
        )
        if word in STOPWORDS:
            continue
        stemmed = stem(word)
        if stemmed in taken_stems:
            continue
        taken_stems.add(stemmed)
        return word


def _sentence(rng, keywords, foreign, background) -> str:
    words = []
    for _ in range(rng.randint(6, 12)):
        roll = rng.random()
        if roll < P_OWN_KEYWORD:
            words.append(rng.choice(keywords))
        elif roll < P_OWN_KEYWORD + P_FOREIGN_KEYWORD and foreign:
            words.append(rng.choice(foreign))
        else:
            words.append(rng.choice(background))
    return " ".join(words).capitalize() + "."


def generate(
    seed: int = 0,
    n_clusters: int = 10,
    docs_per_cluster: int = 20,
    keywords_per_cluster: int = 6,
    background_size: int = 150,
    query_terms: int = 3,
) -> SyntheticCollection:
    rng = random.Random(seed)
    taken: set[str] = set()
    background = [_make_word(rng, taken) for _ in range(background_size)]
    clusters = tuple(
        tuple(_make_word(rng, taken) for _ in range(keywords_per_cluster))
        for _ in range(n_clusters)
    )

    documents = []
    grades: dict[str, dict[str, int]] = {}
    doc_cluster: list[int] = []
    for cluster_idx, keywords in enumerate(clusters):
        foreign = [
            word
            for other_idx, other in enumerate(clusters)
            if other_idx != cluster_idx
            for word in other
        ]
        primary = list(keywords[:query_terms])
        for _ in range(docs_per_cluster):
            doc_id = f"d{len(documents):04d}"
            paragraphs = []
            for p in range(rng.randint(2, 4)):
                sentences = [
                    _sentence(rng, list(keywords), foreign, background)
                    for _ in range(rng.randint(2, 4))
                ]
                if p == 0:
                    # guarantee every query term occurs in the document
                    lead = " ".join(primary).capitalize() + "."
                    sentences.insert(0, lead)
                paragraphs.append(" ".join(sentences))
            documents.append(Document(doc_id=doc_id, paragraphs=tuple(paragraphs)))
            doc_cluster.append(cluster_idx)

    topics = []
    for cluster_idx, keywords in enumerate(clusters):
        topic_id = f"t{cluster_idx + 1:02d}"
        topics.append((topic_id, " ".join(keywords[:query_terms])))
        grades[topic_id] = {
            doc.doc_id: 1 if doc_cluster[i] == cluster_idx else 0
            for i, doc in enumerate(documents)
        }

    return SyntheticCollection(
        documents=tuple(documents),
        topics=tuple(topics),
        qrels=Qrels(grades=grades),
        clusters=clusters,
    )


def write_collection(collection: SyntheticCollection, out_dir) -> dict[str, str]:
    """corpus.jsonl, topics.tsv, qrels.txt under ``out_dir``; returns
    the written paths."""
    os.makedirs(out_dir, exist_ok=True)
    paths = {
        "corpus": os.path.join(out_dir, "corpus.jsonl"),
        "topics": os.path.join(out_dir, "topics.tsv"),
        "qrels": os.path.join(out_dir, "qrels.txt"),
    }
    with open(paths["corpus"], "w", encoding="utf-8") as handle:
        for doc in collection.documents:
            handle.write(
                json.dumps(
                    {"id": doc.doc_id, "paragraphs": list(doc.paragraphs)},
                    sort_keys=True,
                )
                + "\n"
            )
    with open(paths["topics"], "w", encoding="utf-8") as handle:
        for topic_id, query in collection.topics:
            handle.write(f"{topic_id}\t{query}\n")
    with open(paths["qrels"], "w", encoding="utf-8") as handle:
        for topic_id in sorted(collection.qrels.grades):
            for doc_id, grade in sorted(collection.qrels.grades[topic_id].items()):
                handle.write(f"{topic_id} 0 {doc_id} {grade}\n")
    return paths
