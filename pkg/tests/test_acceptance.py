"""Acceptance gate: ten end-of-build criteria, one per test, each
printing a single pass/fail line with the measured quantity.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the verdict
lines as they happen (they also appear in captured output on failure).
"""

import filecmp
import itertools
import math
import time

import numpy as np

from conftest import make_summary
from oracles import brute_ap, enumerate_superposition, random_unit_rows, t_two_sided_p
from tracerank.corpus import Fragment, build_index, make_document
from tracerank.docspace import SubspaceBuilder, build_document_subspace, fragment_vector
from tracerank.evaluation import Qrels, average_precision, paired_t_test, significance_report
from tracerank.linalg import (
    LowRankDensity,
    SparseVector,
    dot,
    pure_density,
    scatter_eigendecomposition,
    trace_product,
    validate_density,
    validate_projector,
)
from tracerank.params import enumerate_configs
from tracerank.querydensity import mixture_density, superposition_mixture_density
from tracerank.retrieval import RankedList
from tracerank.sweep import (
    SweepSettings,
    best_config,
    random_baseline_map,
    run_sweep,
    write_sweep_outputs,
)
from tracerank.synthcorpus import generate
from tracerank.termdensity import build_store, load_store, persist_store


def _verdict(num: int, passed: bool, detail: str) -> None:
    status = "PASS" if passed else "FAIL"
    print(f"\n[acceptance {num:02d}] {status}: {detail}", flush=True)
    assert passed, f"acceptance criterion {num}: {detail}"


def _dense(density: LowRankDensity, dim: int) -> np.ndarray:
    out = np.zeros((dim, dim))
    for lam, vec in zip(density.eigenvalues, density.vectors):
        row = vec.to_dense(dim)
        out += lam * np.outer(row, row)
    return out


_POOL = [f"w{i}" for i in range(14)]


def _random_corpus(rng, force_term: str | None = None):
    docs = []
    for d in range(int(rng.integers(2, 7))):
        words = [str(w) for w in rng.choice(_POOL, size=int(rng.integers(3, 9)))]
        if force_term and d == 0:
            words[0] = force_term
        docs.append(make_document(f"d{d}", [" ".join(words)]))
    return docs


def test_criterion_01_single_term_equivalence():
    # both query constructions must coincide on single-term queries
    rng = np.random.default_rng(101)
    start = time.perf_counter()
    worst = 0.0
    for _ in range(100):
        dim = int(rng.integers(2, 11))
        rows = random_unit_rows(rng, int(rng.integers(1, 7)), dim, nonneg=True)
        summary = make_summary("solo", 0, rows)
        mix = mixture_density([summary], [1.0])
        sup = superposition_mixture_density([summary], [1.0])
        diff = np.linalg.norm(_dense(mix.density, dim) - _dense(sup.density, dim))
        worst = max(worst, float(diff))
    elapsed = time.perf_counter() - start
    _verdict(
        1,
        worst <= 1e-9 and elapsed < 5.0,
        f"single-term mixture vs superposition: max Frobenius gap "
        f"{worst:.2e} (tol 1e-9), 100 cases in {elapsed:.2f}s (budget 5s)",
    )


def test_criterion_02_superposition_closed_form():
    # fixed shape grid: term counts up to 3, contexts per term up to 4
    rng = np.random.default_rng(102)
    start = time.perf_counter()
    worst = 0.0
    cases = 0
    for n_terms in (1, 2, 3):
        for counts in itertools.product((1, 2, 3, 4), repeat=n_terms):
            for dim in (3, 6, 10):
                vector_sets = [
                    random_unit_rows(rng, n, dim, nonneg=True) for n in counts
                ]
                weights = rng.random(n_terms) + 0.1
                weights /= weights.sum()
                summaries = [
                    make_summary(f"t{i}", i, rows)
                    for i, rows in enumerate(vector_sets)
                ]
                qd = superposition_mixture_density(summaries, list(weights))
                total, z = enumerate_superposition(vector_sets, list(weights))
                diff = np.linalg.norm(_dense(qd.density, dim) - total / z)
                worst = max(worst, float(diff), abs(qd.z_q - z) / z)
                cases += 1
    elapsed = time.perf_counter() - start
    _verdict(
        2,
        cases >= 200 and worst <= 1e-9 and elapsed < 30.0,
        f"closed form vs enumeration: {cases} grid cases, max normalized "
        f"Frobenius gap {worst:.2e} (tol 1e-9), {elapsed:.2f}s (budget 30s)",
    )


def test_criterion_03_term_density_exactness(tmp_path):
    # below the rank cap, the stored density is exactly the average of
    # the outer products of the containing fragment vectors
    rng = np.random.default_rng(103)
    worst = 0.0
    for case in range(100):
        docs = _random_corpus(rng, force_term="w0")
        index = build_index(docs)
        scheme = ("tf", "binary")[case % 2]
        store = build_store(index, "document", scheme, terms=["w0"])
        path = tmp_path / f"case{case}.bin"
        persist_store(store, path)
        summary = load_store(path).get("w0")
        vectors = [
            fragment_vector(frag, scheme, index.vocab)
            for per_doc in index.fragments["document"]
            for frag in per_doc
            if "w0" in frag.tokens
        ]
        assert summary is not None and summary.n_vectors == len(vectors)
        dim = len(index.vocab)
        dense = np.zeros((dim, dim))
        for vec in vectors:
            row = vec.to_dense(dim)
            dense += np.outer(row, row)
        dense /= len(vectors)
        diff = np.linalg.norm(_dense(LowRankDensity(summary.eigenvalues, summary.vectors), dim) - dense)
        worst = max(worst, float(diff))
    _verdict(
        3,
        worst <= 1e-8,
        f"stored term densities vs dense average: max Frobenius gap "
        f"{worst:.2e} over 100 random corpora (tol 1e-8)",
    )


def test_criterion_04_operator_contracts():
    # every produced density: trace 1, no eigenvalue below -1e-10,
    # orthonormal basis; every projector orthonormal; every trace
    # product inside [0, 1 + 1e-9]
    rng = np.random.default_rng(104)
    checks = 0
    ok = True
    detail = ""
    try:
        for _ in range(250):
            dim = int(rng.integers(3, 10))
            summaries = [
                make_summary(f"t{i}", i, random_unit_rows(rng, int(rng.integers(1, 5)), dim, nonneg=True))
                for i in range(2)
            ]
            weights = rng.random(2) + 0.1
            weights /= weights.sum()
            produced = [
                LowRankDensity(summaries[0].eigenvalues, summaries[0].vectors),
                mixture_density(summaries, weights).density,
                superposition_mixture_density(summaries, weights).density,
                pure_density(summaries[1].mean_vector),
            ]
            for density in produced:
                validate_density(density, tol=1e-9)
                assert float(np.min(density.eigenvalues)) >= -1e-10
                checks += 1

            docs = _random_corpus(rng)
            index = build_index(docs)
            granularity = ("document", "sentence")[int(rng.integers(2))]
            rule = ("highest", "mean", "all")[int(rng.integers(3))]
            sub = SubspaceBuilder(index).subspace(0, granularity, "tf", rule)
            validate_projector(sub.projector, tol=1e-9)
            checks += 1

            # scores only make sense over one vocabulary: restrict to the
            # corpus-side projector and densities over corpus term ids
            dvec = fragment_vector(index.fragments["document"][1][0], "tf", index.vocab)
            for density in (pure_density(dvec), ):
                score = trace_product(density, sub.projector)
                assert -0.0 <= score <= 1.0 + 1e-9
                checks += 1
            score = trace_product(produced[1], sub.projector)
            assert 0.0 <= score <= 1.0 + 1e-9
            checks += 1
    except AssertionError as exc:
        ok = False
        detail = f"contract violated after {checks} checks: {exc}"
    if ok:
        detail = (
            f"{checks} density/projector/trace checks: traces within 1e-9, "
            f"eigenvalues >= -1e-10, bases orthonormal, scores in [0, 1+1e-9]"
        )
    _verdict(4, ok and checks >= 1000, detail)


def test_criterion_05_classical_reduction():
    # document granularity with a pure rank-1 query: the trace score is
    # the squared cosine between query and document vectors
    rng = np.random.default_rng(105)
    worst = 0.0
    pairs = 0
    while pairs < 100:
        docs = _random_corpus(rng)
        index = build_index(docs)
        stats = index.vocab
        q_tokens = tuple(
            t
            for t in (str(w) for w in rng.choice(_POOL, size=int(rng.integers(1, 5))))
            if t in stats.term_ids
        )
        if not q_tokens:
            continue
        qvec = fragment_vector(
            Fragment(doc_id="q", ordinal=0, tokens=q_tokens), "tf", stats
        )
        doc_pos = int(rng.integers(len(docs)))
        sub = build_document_subspace(docs[doc_pos], "document", "tf", "highest", stats)
        dvec = fragment_vector(index.fragments["document"][doc_pos][0], "tf", stats)
        score = trace_product(pure_density(qvec), sub.projector)
        expected = dot(qvec, dvec) ** 2
        worst = max(worst, abs(score - expected))
        pairs += 1
    _verdict(
        5,
        worst <= 1e-9,
        f"pure query against one-fragment documents: max |score - cos^2| "
        f"{worst:.2e} over {pairs} pairs (tol 1e-9)",
    )


def test_criterion_06_scatter_reconstruction():
    rng = np.random.default_rng(106)
    worst = 0.0
    for _ in range(100):
        n = int(rng.integers(1, 13))
        dim = int(rng.integers(2, 17))
        rows = rng.normal(size=(n, dim))
        ids = np.arange(dim, dtype=np.int64)
        evals, vectors = scatter_eigendecomposition(
            [SparseVector(ids, row) for row in rows]
        )
        approx = np.zeros((dim, dim))
        for lam, vec in zip(evals, vectors):
            dense = vec.to_dense(dim)
            approx += lam * np.outer(dense, dense)
        worst = max(worst, float(np.linalg.norm(approx - rows.T @ rows)))
    _verdict(
        6,
        worst <= 1e-8,
        f"full-rank scatter reconstruction: max Frobenius gap {worst:.2e} "
        f"over 100 cases up to 12 vectors in 16 dims (tol 1e-8)",
    )


def test_criterion_07_configuration_grid():
    configs = enumerate_configs()
    unique = len(set(configs))
    _verdict(
        7,
        len(configs) == 756 and unique == 756,
        f"configuration grid: {len(configs)} entries, {unique} unique (expected 756)",
    )


def test_criterion_08_average_precision_oracle():
    qrels = Qrels(grades={"t": {"d1": 1, "d3": 1, "d2": 0}})
    worked = average_precision(
        RankedList("t", (("d1", 3.0), ("d2", 2.0), ("d3", 1.0))), qrels
    )
    rng = np.random.default_rng(108)
    mismatches = 0
    for _ in range(1000):
        n_docs = int(rng.integers(1, 21))
        doc_ids = [f"d{i}" for i in range(n_docs)]
        grades = {d: int(rng.random() < 0.4) for d in doc_ids}
        if sum(grades.values()) == 0:
            grades[doc_ids[0]] = 1
        retrieved = list(rng.permutation(doc_ids)[: int(rng.integers(0, n_docs + 1))])
        got = average_precision(
            RankedList("t", tuple((d, 0.0) for d in retrieved)),
            Qrels(grades={"t": grades}),
        )
        want = brute_ap([grades[d] == 1 for d in retrieved], sum(grades.values()))
        if got != want:
            mismatches += 1
    _verdict(
        8,
        mismatches == 0 and round(worked, 4) == 0.8333,
        f"average precision: {mismatches} mismatches against the "
        f"from-definition oracle over 1000 rankings; worked value "
        f"{worked:.4f} (expected 0.8333)",
    )


def test_criterion_09_t_test_oracle():
    t, p, df = paired_t_test([1.0, 2.0, 3.0, 4.0, 5.0], [0.0] * 5)
    example_ok = abs(t - 4.2426) <= 1e-3 and df == 4 and abs(p - 0.0132) <= 1e-3
    rng = np.random.default_rng(109)
    worst = 0.0
    for df_target in range(1, 31):
        t_stat = float(rng.uniform(-4.0, 4.0))
        n = df_target + 1
        d = rng.normal(size=n)
        d = d - d.mean()
        d = d + t_stat * d.std(ddof=1) / math.sqrt(n)
        _, p_got, _ = paired_t_test(d, np.zeros(n))
        worst = max(worst, abs(p_got - t_two_sided_p(t_stat, df_target)))
    _verdict(
        9,
        example_ok and worst <= 1e-6,
        f"paired t-test: worked example t={t:.4f}, p={p:.4f}, df={df} "
        f"(expected 4.2426/0.0132/4); max |p - integrated p| {worst:.2e} "
        f"for df 1-30 (tol 1e-6)",
    )


def test_criterion_10_end_to_end_sweep(tmp_path):
    collection = generate(seed=0)
    assert len(collection.documents) == 200
    assert len(collection.topics) == 10
    index = build_index(collection.documents)
    settings = SweepSettings()

    start = time.perf_counter()
    results, runs = run_sweep(index, collection.topics, collection.qrels, settings)
    elapsed = time.perf_counter() - start

    report = significance_report(results)
    rows = report.splitlines()

    best, best_map = best_config(results)
    baseline = random_baseline_map(
        index, collection.topics, collection.qrels, n_seeds=20
    )

    # determinism: a second identical sweep writes identical bytes
    results2, runs2 = run_sweep(index, collection.topics, collection.qrels, settings)
    dir_a, dir_b = tmp_path / "a", tmp_path / "b"
    write_sweep_outputs(results, runs, dir_a)
    write_sweep_outputs(results2, runs2, dir_b)
    names = sorted(p.name for p in (dir_a / "runs").iterdir())
    match, mismatch, errors = filecmp.cmpfiles(
        dir_a / "runs", dir_b / "runs", names, shallow=False
    )
    identical = (
        (dir_a / "results.jsonl").read_bytes() == (dir_b / "results.jsonl").read_bytes()
        and (dir_a / "report.txt").read_bytes() == (dir_b / "report.txt").read_bytes()
        and not mismatch
        and not errors
        and len(match) == 756
    )

    _verdict(
        10,
        elapsed < 600.0 and len(rows) == 7 and best_map > baseline and identical,
        f"end-to-end sweep over 756 configs x 10 topics: {elapsed:.1f}s "
        f"(budget 600s), report rows {len(rows)} (expected 7), best config "
        f"MAP {best_map:.4f} vs shuffled-candidate MAP {baseline:.4f} "
        f"({best.key()}), rerun byte-identical: {identical}",
    )
