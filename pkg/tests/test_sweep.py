"""Full-grid sweep: coverage, agreement with the independent store-based
scoring path, parallel equivalence, and byte-identical outputs."""

import filecmp
import json

import numpy as np
import pytest

from tracerank.corpus import build_index, tokenize
from tracerank.params import enumerate_configs
from tracerank.querydensity import build_query_density
from tracerank.retrieval import first_pass, read_run, rerank
from tracerank.sweep import (
    SweepEngine,
    SweepSettings,
    best_config,
    config_map,
    random_baseline_map,
    run_sweep,
    write_sweep_outputs,
)
from tracerank.synthcorpus import generate
from tracerank.termdensity import build_store

SETTINGS = SweepSettings(candidates=100, rank_cap=10, sample_size=10_000, seed=0)


@pytest.fixture(scope="module")
def small_collection():
    return generate(seed=5, n_clusters=3, docs_per_cluster=4, background_size=40)


@pytest.fixture(scope="module")
def small_index(small_collection):
    return build_index(small_collection.documents)


@pytest.fixture(scope="module")
def sweep_outputs(small_index, small_collection):
    return run_sweep(
        small_index, small_collection.topics, small_collection.qrels, SETTINGS
    )


class TestRunSweep:
    def test_full_coverage(self, sweep_outputs, small_collection):
        results, runs = sweep_outputs
        configs = enumerate_configs()
        assert list(results.configs) == configs
        assert list(results.topics) == [t for t, _ in small_collection.topics]
        assert len(results.ap) == len(configs) * len(results.topics)
        assert all(0.0 <= ap <= 1.0 for ap in results.ap.values())
        assert set(runs) == set(configs)
        for ranked_lists in runs.values():
            assert [r.topic_id for r in ranked_lists] == list(results.topics)

    def test_ranked_lists_are_candidate_permutations(
        self, sweep_outputs, small_index, small_collection
    ):
        _, runs = sweep_outputs
        expected = {
            topic_id: sorted(
                first_pass(
                    tokenize(query), small_index, topic_id, k=SETTINGS.candidates
                ).doc_ids()
            )
            for topic_id, query in small_collection.topics
        }
        for config in list(runs)[:: 101]:
            for ranked in runs[config]:
                assert sorted(ranked.doc_ids()) == expected[ranked.topic_id]

    def test_matches_store_based_path(
        self, sweep_outputs, small_index, small_collection
    ):
        # independent route: persistably-built term densities, the
        # generic query constructor, and per-document re-ranking must
        # reproduce the vectorized sweep scores exactly
        _, runs = sweep_outputs
        stats = small_index.vocab
        stores = {}
        probe = enumerate_configs()[::47]
        assert len(probe) >= 15
        for config in probe:
            key = (config.fragment, config.query_weighting)
            if key not in stores:
                stores[key] = build_store(
                    small_index,
                    config.fragment,
                    config.query_weighting,
                    max_rank=SETTINGS.rank_cap,
                    max_docs=SETTINGS.sample_size,
                    seed=SETTINGS.seed,
                )
            store = stores[key]
            for topic_pos, (topic_id, query) in enumerate(small_collection.topics):
                tokens = tokenize(query)
                candidates = first_pass(
                    tokens, small_index, topic_id, k=SETTINGS.candidates
                )
                qd = build_query_density(tokens, store, stats, config)
                ranked = rerank(candidates, qd, config, small_index)
                swept = runs[config][topic_pos]
                assert ranked.doc_ids() == swept.doc_ids(), config
                for (_, a), (_, b) in zip(ranked.entries, swept.entries):
                    assert a == pytest.approx(b, abs=1e-9)

    def test_parallel_jobs_equivalent(self, small_index, small_collection, sweep_outputs):
        serial_results, serial_runs = sweep_outputs
        results, runs = run_sweep(
            small_index,
            small_collection.topics,
            small_collection.qrels,
            SETTINGS,
            jobs=2,
        )
        assert results.ap == serial_results.ap
        for config in serial_runs:
            assert runs[config] == serial_runs[config]

    def test_unanswerable_topic_scores_zero(self, small_index, small_collection):
        topics = [("tx", "xylophon zzyzx")]  # no token survives in the corpus
        qrels = small_collection.qrels
        results, runs = run_sweep(small_index, topics, qrels, SETTINGS)
        assert results.topics == ()  # not in qrels: excluded from AP
        for ranked_lists in runs.values():
            assert all(len(r) == 0 for r in ranked_lists)


class TestAggregates:
    def test_config_map_is_mean_ap(self, sweep_outputs):
        results, _ = sweep_outputs
        config = results.configs[0]
        expected = np.mean([results.ap[(t, config)] for t in results.topics])
        assert config_map(results, config) == pytest.approx(float(expected))

    def test_best_config_attains_maximum(self, sweep_outputs):
        results, _ = sweep_outputs
        config, value = best_config(results)
        assert value == pytest.approx(config_map(results, config))
        assert value >= max(config_map(results, c) for c in results.configs) - 1e-12

    def test_random_baseline_deterministic_and_bounded(
        self, small_index, small_collection
    ):
        a = random_baseline_map(
            small_index,
            small_collection.topics,
            small_collection.qrels,
            n_seeds=5,
            k=SETTINGS.candidates,
        )
        b = random_baseline_map(
            small_index,
            small_collection.topics,
            small_collection.qrels,
            n_seeds=5,
            k=SETTINGS.candidates,
        )
        assert a == b
        assert 0.0 < a < 1.0


class TestOutputs:
    def test_written_artifacts(self, sweep_outputs, tmp_path):
        results, runs = sweep_outputs
        out = tmp_path / "out"
        write_sweep_outputs(results, runs, out)
        lines = (out / "results.jsonl").read_text().splitlines()
        assert len(lines) == len(results.topics) * 756
        row = json.loads(lines[0])
        assert set(row) == {"topic", "config", "ap"}
        report = (out / "report.txt").read_text()
        assert len(report.splitlines()) == 7
        run_files = sorted((out / "runs").iterdir())
        assert len(run_files) == 756
        loaded = read_run(run_files[0])
        assert set(loaded) == set(results.topics)

    def test_rerun_byte_identical(
        self, small_index, small_collection, sweep_outputs, tmp_path
    ):
        results_a, runs_a = sweep_outputs
        results_b, runs_b = run_sweep(
            small_index, small_collection.topics, small_collection.qrels, SETTINGS
        )
        dir_a, dir_b = tmp_path / "a", tmp_path / "b"
        write_sweep_outputs(results_a, runs_a, dir_a)
        write_sweep_outputs(results_b, runs_b, dir_b)
        assert (dir_a / "results.jsonl").read_bytes() == (dir_b / "results.jsonl").read_bytes()
        assert (dir_a / "report.txt").read_bytes() == (dir_b / "report.txt").read_bytes()
        match, mismatch, errors = filecmp.cmpfiles(
            dir_a / "runs",
            dir_b / "runs",
            [p.name for p in (dir_a / "runs").iterdir()],
            shallow=False,
        )
        assert not mismatch and not errors
        assert len(match) == 756


class TestEngineCaches:
    def test_term_summary_cache_topic_independent(self, small_index, small_collection):
        engine = SweepEngine(small_index, SETTINGS)
        term = tokenize(small_collection.topics[0][1])[0]
        first = engine.term_summary(term, "sentence", "tf")
        assert engine.term_summary(term, "sentence", "tf") is first
        assert engine.term_summary("zzzz_unknown", "sentence", "tf") is None

    def test_subspace_cache_shared_across_topics(self, small_index, small_collection):
        engine = SweepEngine(small_index, SETTINGS)
        engine.topic_run(*small_collection.topics[0])
        size_after_one = len(engine.builder._cache)
        engine.topic_run(*small_collection.topics[1])
        size_after_two = len(engine.builder._cache)
        # overlapping candidates reuse decompositions instead of rebuilding
        assert size_after_two < 2 * size_after_one
