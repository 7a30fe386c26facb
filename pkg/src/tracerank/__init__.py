"""Subspace document representations and density-operator queries.

Documents are represented by projectors onto the span of their fragment
vectors; queries by density operators built from per-term densities.
Relevance is the trace probability tr(rho_q S_d), used to re-rank a
BM25 first pass.
"""

__version__ = "0.1.0"

from .corpus import (
    CorpusIndex,
    Document,
    Fragment,
    VocabularyStats,
    build_index,
    idf,
    read_corpus,
    read_topics,
    segment,
    split_sentences,
    tokenize,
)
from .docspace import (
    DocumentSubspace,
    SubspaceBuilder,
    build_document_subspace,
    fragment_vector,
    select_dimension,
)
from .errors import (
    CorpusError,
    DegenerateDensityError,
    DegenerateTermError,
    EmptyQueryError,
    EvaluationError,
    StoreFormatError,
    StoreMismatchError,
    TraceRankError,
    UnknownTermError,
)
from .estimator import SubspaceRetriever
from .evaluation import (
    Qrels,
    SweepResult,
    average_precision,
    mean_average_precision,
    means_of_medians,
    paired_t_test,
    read_qrels,
    significance_report,
)
from .linalg import (
    IncrementalScatter,
    LowRankDensity,
    Projector,
    SparseVector,
    dot,
    incremental_truncated_eigendecomposition,
    normalize_trace,
    pure_density,
    scatter_eigendecomposition,
    trace_product,
)
from .params import ParamConfig, enumerate_configs, make_config
from .querydensity import (
    QueryDensity,
    build_query_density,
    finalize_query_density,
    mixture_density,
    superposition_mixture_density,
    term_weights,
)
from .retrieval import (
    RankedList,
    bm25_scores,
    first_pass,
    read_run,
    rerank,
    rsj_idf,
    write_run,
)
from .sweep import (
    SweepEngine,
    SweepSettings,
    best_config,
    random_baseline_map,
    run_sweep,
    write_sweep_outputs,
)
from .termdensity import (
    TermDensityStore,
    TermDensitySummary,
    build_store,
    build_term_density,
    load_store,
    persist_store,
    sample_documents,
    vocabulary_hash,
)

__all__ = [name for name in dir() if not name.startswith("_")]
