"""Command-line pipelines: index, term-densities, search, sweep,
report, eval, synth.

Every command that writes an output also writes a run manifest (flags,
seeds, input hashes, tool version, timestamp) sufficient to reproduce
the output byte-for-byte; the outputs themselves carry no timestamps.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
from dataclasses import dataclass, field
from datetime import datetime, timezone

from . import __version__
from .corpus import build_index, read_corpus, read_topics, tokenize
from .errors import (
    CorpusError,
    EmptyQueryError,
    StoreFormatError,
    StoreMismatchError,
    TraceRankError,
)
from .evaluation import SweepResult, average_precision, read_qrels, significance_report
from .params import (
    CONSTRUCTIONS,
    DIM_RULES,
    FRAGMENTS,
    TERM_WEIGHTS,
    WEIGHTINGS,
    ParamConfig,
    make_config,
)
from .querydensity import build_query_density
from .retrieval import (
    DEFAULT_CANDIDATES,
    RankedList,
    first_pass,
    read_run,
    rerank,
    write_run,
)
from .sweep import SweepSettings, run_sweep, write_sweep_outputs
from .synthcorpus import generate, write_collection
from .termdensity import (
    DEFAULT_RANK_CAP,
    DEFAULT_SAMPLE_SIZE,
    build_store,
    load_store,
    persist_store,
    vocabulary_hash,
)

logger = logging.getLogger("tracerank")

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_USAGE = 2
EXIT_MISSING_FILE = 3
EXIT_STORE = 4
EXIT_EMPTY_QUERY = 5

_CONFIG_KEYS = {
    "fragment": FRAGMENTS,
    "doc-weighting": WEIGHTINGS,
    "query-weighting": WEIGHTINGS,
    "doc-dim": DIM_RULES,
    "query-dim": DIM_RULES,
    "term-weight": TERM_WEIGHTS,
    "construction": CONSTRUCTIONS,
}
_NUMERIC_KEYS = {
    "candidates": DEFAULT_CANDIDATES,
    "rank-cap": DEFAULT_RANK_CAP,
    "sample-size": DEFAULT_SAMPLE_SIZE,
    "seed": 0,
}


@dataclass
class RunManifest:
    command: str
    arguments: dict
    inputs: dict = field(default_factory=dict)
    version: str = __version__
    created: str = ""

    def write(self, path) -> None:
        payload = {
            "tool": "tracerank",
            "version": self.version,
            "command": self.command,
            "arguments": self.arguments,
            "inputs": self.inputs,
            "created": self.created or datetime.now(timezone.utc).isoformat(),
        }
        with open(path, "w", encoding="utf-8") as handle:
            json.dump(payload, handle, indent=2, sort_keys=True)
            handle.write("\n")


def _sha256(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as handle:
        for chunk in iter(lambda: handle.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _manifest(command: str, arguments: dict, inputs) -> RunManifest:
    return RunManifest(
        command=command,
        arguments={k: v for k, v in sorted(arguments.items())},
        inputs={str(p): _sha256(p) for p in inputs},
    )


def _add_param_flags(parser: argparse.ArgumentParser) -> None:
    grid = parser.add_argument_group(
        "configuration", "experiment parameters; unset flags fall back to "
        "the config file, then to the defaults"
    )
    grid.add_argument("--fragment", choices=FRAGMENTS, help="fragment granularity, row (1)")
    grid.add_argument("--doc-weighting", choices=WEIGHTINGS, help="document weighting, row (2)")
    grid.add_argument("--query-weighting", choices=WEIGHTINGS, help="query weighting, row (3)")
    grid.add_argument("--doc-dim", choices=DIM_RULES, help="document dimension rule, row (4)")
    grid.add_argument("--query-dim", choices=DIM_RULES, help="query dimension rule, row (5)")
    grid.add_argument("--term-weight", choices=TERM_WEIGHTS, help="query term weight, row (6)")
    grid.add_argument("--construction", choices=CONSTRUCTIONS, help="query construction, row (7)")
    grid.add_argument("--config", metavar="FILE", help="key=value defaults for any flag above")


def _add_numeric_flags(parser: argparse.ArgumentParser, keys=("candidates", "rank-cap", "sample-size", "seed")) -> None:
    for key in keys:
        parser.add_argument(
            f"--{key}",
            type=int,
            default=None,
            help=f"default {_NUMERIC_KEYS[key]}",
        )


def _read_config_file(path) -> dict[str, str]:
    values: dict[str, str] = {}
    with open(path, encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise CorpusError(f"{path}:{lineno}: expected key=value")
            key, value = (part.strip() for part in line.split("=", 1))
            key = key.replace("_", "-")
            if key not in _CONFIG_KEYS and key not in _NUMERIC_KEYS:
                raise CorpusError(f"{path}:{lineno}: unknown key {key!r}")
            values[key] = value
    return values


def _resolve(args) -> tuple[ParamConfig, dict[str, int]]:
    """Merge flag values over config-file values over defaults."""
    file_values = _read_config_file(args.config) if getattr(args, "config", None) else {}
    merged: dict[str, str] = {}
    for key in _CONFIG_KEYS:
        flag = getattr(args, key.replace("-", "_"), None)
        if flag is not None:
            merged[key.replace("-", "_")] = flag
        elif key in file_values:
            value = file_values[key]
            if value not in _CONFIG_KEYS[key]:
                raise CorpusError(f"config file: {key} must be one of {_CONFIG_KEYS[key]}")
            merged[key.replace("-", "_")] = value
    numeric: dict[str, int] = {}
    for key, default in _NUMERIC_KEYS.items():
        flag = getattr(args, key.replace("-", "_"), None)
        if flag is not None:
            numeric[key.replace("-", "_")] = int(flag)
        elif key in file_values:
            numeric[key.replace("-", "_")] = int(file_values[key])
        else:
            numeric[key.replace("-", "_")] = default
    return make_config(**merged), numeric


def _load_index(index_dir):
    corpus_path = os.path.join(index_dir, "corpus.jsonl")
    documents = read_corpus(corpus_path)
    index = build_index(documents)
    meta_path = os.path.join(index_dir, "meta.json")
    if os.path.exists(meta_path):
        with open(meta_path, encoding="utf-8") as handle:
            meta = json.load(handle)
        if meta.get("vocab_hash") != vocabulary_hash(index.vocab):
            raise CorpusError(f"{index_dir}: index metadata does not match corpus")
    return index


def _cmd_index(args) -> int:
    documents = read_corpus(args.corpus)
    index = build_index(documents)
    os.makedirs(args.out, exist_ok=True)
    out_corpus = os.path.join(args.out, "corpus.jsonl")
    with open(out_corpus, "w", encoding="utf-8") as handle:
        for doc in index.documents:
            handle.write(
                json.dumps(
                    {"id": doc.doc_id, "paragraphs": list(doc.paragraphs)},
                    sort_keys=True,
                )
                + "\n"
            )
    with open(os.path.join(args.out, "meta.json"), "w", encoding="utf-8") as handle:
        json.dump(
            {
                "documents": index.n_documents,
                "vocabulary": len(index.vocab),
                "vocab_hash": vocabulary_hash(index.vocab),
            },
            handle,
            indent=2,
            sort_keys=True,
        )
        handle.write("\n")
    _manifest("index", {"corpus": args.corpus, "out": args.out}, [args.corpus]).write(
        os.path.join(args.out, "manifest.json")
    )
    logger.info(
        "indexed %d documents, %d terms", index.n_documents, len(index.vocab)
    )
    return EXIT_OK


def _cmd_term_densities(args) -> int:
    config, numeric = _resolve(args)
    index = _load_index(args.index)
    store = build_store(
        index,
        granularity=config.fragment,
        scheme=config.query_weighting,
        max_rank=numeric["rank_cap"],
        max_docs=numeric["sample_size"],
        seed=numeric["seed"],
    )
    persist_store(store, args.out)
    _manifest(
        "term-densities",
        {
            "index": args.index,
            "out": args.out,
            "fragment": config.fragment,
            "query_weighting": config.query_weighting,
            **numeric,
        },
        [os.path.join(args.index, "corpus.jsonl")],
    ).write(args.out + ".manifest.json")
    logger.info("stored %d term densities in %s", len(store), args.out)
    return EXIT_OK


def _cmd_search(args) -> int:
    config, numeric = _resolve(args)
    index = _load_index(args.index)
    store = load_store(args.store)
    store.ensure_compatible(
        vocabulary_hash(index.vocab), config.fragment, config.query_weighting
    )
    tokens = tokenize(args.query)
    candidates = first_pass(tokens, index, args.topic, k=numeric["candidates"])
    qd = build_query_density(tokens, store, index.vocab, config)
    ranked = rerank(candidates, qd, config, index)
    if args.out:
        write_run(ranked, args.tag or config.key(), args.out)
        _manifest(
            "search",
            {
                "index": args.index,
                "store": args.store,
                "query": args.query,
                "topic": args.topic,
                "out": args.out,
                **config.as_dict(),
                **numeric,
            },
            [os.path.join(args.index, "corpus.jsonl"), args.store],
        ).write(args.out + ".manifest.json")
    else:
        tag = args.tag or config.key()
        for rank, (doc_id, score) in enumerate(ranked.entries, start=1):
            print(f"{ranked.topic_id} Q0 {doc_id} {rank} {score:.6f} {tag}")
    return EXIT_OK


def _cmd_sweep(args) -> int:
    _, numeric = _resolve(args)
    index = _load_index(args.index)
    topics = read_topics(args.topics)
    qrels = read_qrels(args.qrels)
    settings = SweepSettings(
        candidates=numeric["candidates"],
        rank_cap=numeric["rank_cap"],
        sample_size=numeric["sample_size"],
        seed=numeric["seed"],
    )
    jobs = args.jobs if args.jobs else os.cpu_count() or 1
    results, runs = run_sweep(index, topics, qrels, settings, jobs=jobs)
    write_sweep_outputs(results, runs, args.out)
    _manifest(
        "sweep",
        {
            "index": args.index,
            "topics": args.topics,
            "qrels": args.qrels,
            "out": args.out,
            "jobs": jobs,
            **numeric,
        },
        [os.path.join(args.index, "corpus.jsonl"), args.topics, args.qrels],
    ).write(os.path.join(args.out, "manifest.json"))
    logger.info(
        "swept %d configurations over %d topics", len(results.configs), len(results.topics)
    )
    return EXIT_OK


def _cmd_report(args) -> int:
    topics: list[str] = []
    configs: list[ParamConfig] = []
    seen_configs = set()
    ap = {}
    with open(args.results, encoding="utf-8") as handle:
        for line in handle:
            line = line.strip()
            if not line:
                continue
            row = json.loads(line)
            config = ParamConfig(**row["config"])
            if row["topic"] not in topics:
                topics.append(row["topic"])
            if config not in seen_configs:
                seen_configs.add(config)
                configs.append(config)
            ap[(row["topic"], config)] = float(row["ap"])
    results = SweepResult(topics=tuple(topics), configs=tuple(configs), ap=ap)
    report = significance_report(results)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as handle:
            handle.write(report)
        _manifest("report", {"results": args.results, "out": args.out}, [args.results]).write(
            args.out + ".manifest.json"
        )
    else:
        print(report, end="")
    return EXIT_OK


def _cmd_eval(args) -> int:
    qrels = read_qrels(args.qrels)
    runs = read_run(args.run)
    aps = []
    for topic_id in qrels.topics():
        if qrels.relevant_count(topic_id) == 0:
            continue
        ranked = runs.get(topic_id, RankedList(topic_id=topic_id, entries=()))
        ap = average_precision(ranked, qrels)
        aps.append(ap)
        if args.per_topic:
            print(f"{topic_id}\t{ap:.4f}")
    if not aps:
        print("map\t0.0000")
        return EXIT_OK
    print(f"map\t{sum(aps) / len(aps):.4f}")
    return EXIT_OK


def _cmd_synth(args) -> int:
    collection = generate(
        seed=args.seed if args.seed is not None else 0,
        n_clusters=args.clusters,
        docs_per_cluster=args.docs_per_cluster,
    )
    paths = write_collection(collection, args.out)
    _manifest(
        "synth",
        {
            "out": args.out,
            "seed": args.seed if args.seed is not None else 0,
            "clusters": args.clusters,
            "docs_per_cluster": args.docs_per_cluster,
        },
        [],
    ).write(os.path.join(args.out, "manifest.json"))
    logger.info("wrote %s", ", ".join(sorted(paths.values())))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tracerank",
        description="Subspace document representations with density-operator "
        "queries: index, precompute term densities, search, sweep, evaluate.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("index", help="normalize a corpus into an index directory")
    p.add_argument("corpus", help="JSON-lines corpus file")
    p.add_argument("--out", required=True, help="index directory")
    p.set_defaults(func=_cmd_index)

    p = sub.add_parser("term-densities", help="precompute the per-term density store")
    p.add_argument("--index", required=True)
    p.add_argument("--out", required=True, help="store file")
    _add_param_flags(p)
    _add_numeric_flags(p)
    p.set_defaults(func=_cmd_term_densities)

    p = sub.add_parser("search", help="rank one query against an index")
    p.add_argument("--index", required=True)
    p.add_argument("--store", required=True)
    p.add_argument("--query", required=True)
    p.add_argument("--topic", default="q1", help="topic id for the run lines")
    p.add_argument("--tag", default=None, help="run tag (default: the config key)")
    p.add_argument("--out", default=None, help="run file (default: stdout)")
    _add_param_flags(p)
    _add_numeric_flags(p)
    p.set_defaults(func=_cmd_search)

    p = sub.add_parser("sweep", help="run every configuration over a topic file")
    p.add_argument("--index", required=True)
    p.add_argument("--topics", required=True)
    p.add_argument("--qrels", required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--jobs", type=int, default=None, help="parallel workers (default: all cores)")
    _add_param_flags(p)
    _add_numeric_flags(p)
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("report", help="significance table from a sweep dump")
    p.add_argument("--results", required=True, help="results.jsonl from sweep")
    p.add_argument("--out", default=None, help="report file (default: stdout)")
    p.set_defaults(func=_cmd_report)

    p = sub.add_parser("eval", help="average precision of a run file")
    p.add_argument("--run", required=True)
    p.add_argument("--qrels", required=True)
    p.add_argument("--per-topic", action="store_true")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("synth", help="generate the synthetic clustered collection")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--clusters", type=int, default=10)
    p.add_argument("--docs-per-cluster", type=int, default=20)
    p.set_defaults(func=_cmd_synth)

    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        logger.error("missing file: %s", exc.filename or exc)
        return EXIT_MISSING_FILE
    except (StoreFormatError, StoreMismatchError) as exc:
        logger.error("%s", exc)
        return EXIT_STORE
    except EmptyQueryError as exc:
        logger.error("%s", exc)
        return EXIT_EMPTY_QUERY
    except TraceRankError as exc:
        logger.error("%s", exc)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
