"""Synthetic collection generator: determinism, planted structure, and
file round trips."""

from tracerank.corpus import build_index, read_corpus, read_topics, tokenize
from tracerank.evaluation import read_qrels
from tracerank.retrieval import first_pass
from tracerank.synthcorpus import generate, write_collection
from tracerank.stemmer import stem


class TestGenerate:
    def test_shape(self):
        coll = generate(seed=1, n_clusters=4, docs_per_cluster=5, background_size=30)
        assert len(coll.documents) == 20
        assert len(coll.topics) == 4
        assert len(coll.clusters) == 4
        for topic_id, _ in coll.topics:
            assert coll.qrels.relevant_count(topic_id) == 5

    def test_deterministic(self):
        a = generate(seed=9, n_clusters=3, docs_per_cluster=3, background_size=25)
        b = generate(seed=9, n_clusters=3, docs_per_cluster=3, background_size=25)
        assert a.documents == b.documents
        assert a.topics == b.topics
        assert a.qrels == b.qrels
        c = generate(seed=10, n_clusters=3, docs_per_cluster=3, background_size=25)
        assert c.documents != a.documents

    def test_query_terms_occur_in_every_relevant_doc(self):
        coll = generate(seed=2, n_clusters=3, docs_per_cluster=4, background_size=25)
        by_id = {doc.doc_id: doc for doc in coll.documents}
        for (topic_id, query), _ in zip(coll.topics, coll.clusters):
            q_tokens = set(tokenize(query))
            for doc_id, grade in coll.qrels.grades[topic_id].items():
                if grade < 1:
                    continue
                doc_tokens = {
                    t for p in by_id[doc_id].paragraphs for t in tokenize(p)
                }
                assert q_tokens <= doc_tokens, (topic_id, doc_id)

    def test_keyword_stems_unique(self):
        coll = generate(seed=4, n_clusters=5, docs_per_cluster=2, background_size=40)
        stems = [stem(w) for cluster in coll.clusters for w in cluster]
        assert len(stems) == len(set(stems))

    def test_candidate_lists_mix_clusters(self):
        # the foreign-keyword leak must put non-relevant documents into
        # first-pass candidates, otherwise re-ranking would be moot
        coll = generate(seed=0)
        index = build_index(coll.documents)
        mixed = 0
        for topic_id, query in coll.topics:
            candidates = first_pass(tokenize(query), index, topic_id)
            relevant = {
                d for d, g in coll.qrels.grades[topic_id].items() if g >= 1
            }
            ids = set(candidates.doc_ids())
            assert relevant <= ids  # guaranteed by the lead sentence
            if ids - relevant:
                mixed += 1
        assert mixed >= 5  # most topics attract impostors


class TestWriteCollection:
    def test_files_round_trip(self, tmp_path):
        coll = generate(seed=7, n_clusters=3, docs_per_cluster=3, background_size=25)
        paths = write_collection(coll, tmp_path)
        docs = read_corpus(paths["corpus"])
        assert tuple(docs) == coll.documents
        assert tuple(read_topics(paths["topics"])) == coll.topics
        assert read_qrels(paths["qrels"]) == coll.qrels

    def test_write_is_deterministic(self, tmp_path):
        coll = generate(seed=7, n_clusters=3, docs_per_cluster=3, background_size=25)
        a_dir, b_dir = tmp_path / "a", tmp_path / "b"
        write_collection(coll, a_dir)
        write_collection(coll, b_dir)
        for name in ("corpus.jsonl", "topics.tsv", "qrels.txt"):
            assert (a_dir / name).read_bytes() == (b_dir / name).read_bytes()
