"""Two-phase conflict detection for natural-language software requirements."""

from .corpus import (
    CorpusError,
    FoldAssignment,
    Requirement,
    RequirementSet,
    generate_synthetic,
    make_folds,
    parse_requirements,
    serialize_requirements,
)
from .embedding import (
    EmbeddingError,
    EmbeddingTable,
    TfidfModel,
    embed_tfidf,
    fit_tfidf,
    fuse,
    load_external_embeddings,
    tfidf_table,
)
from .similarity import SimilarityMatrix, cosine, max_similarity, pairwise_matrix, top_m
from .threshold import (
    CandidateConflictSet,
    CutoffSelection,
    RocPoint,
    phase1_detect,
    predict_labels,
    roc_points,
    select_cutoff,
)
from .semantic import (
    EntityProfile,
    FinalConflictSet,
    overlap,
    overlap_ratio,
    phase2_filter,
    profile_from_spans,
    unique_entities,
)
from .evaluation import ConfusionMatrix, aggregate_folds, confusion, format_delta, macro_metrics

__version__ = "0.1.0"
