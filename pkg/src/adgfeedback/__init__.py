"""Graph-guided feedback for scored short-answer responses.

A prompt's logical structure is captured as a graph of sentence, chunk, and
model-answer nodes joined by relation-labeled edges. A scored response's
justification cue is aligned to the node it most resembles; the relation
between that node and the model answer selects a feedback template, which is
rendered with response-specific slot values into a per-criterion report.
The stats module reproduces the survey analyses used to evaluate the
approach, and the service module serves the whole pipeline over HTTP.
"""

from .alignment import (
    DEFAULT_THRESHOLD,
    AlignConfig,
    AlignmentError,
    AlignmentResult,
    CharNgramProvider,
    NoCandidatesError,
    ProviderUnavailableError,
    RemoteEmbeddingProvider,
    TokenTfidfProvider,
    align_cue,
    candidate_nodes,
    cosine,
    embed_remote,
    ngram_profile,
    normalize_text,
)
from .corpus import (
    Corpus,
    CorpusError,
    Criterion,
    CriterionResult,
    LengthConstraint,
    PromptSpec,
    ScoredResponse,
    cue_text,
    load_corpus,
    load_corpus_path,
    split_sentences,
)
from .feedback import (
    FeedbackConfig,
    FeedbackError,
    FeedbackItem,
    FeedbackReport,
    FeedbackTemplate,
    SelectionContext,
    TemplateRegistry,
    generate_feedback,
    generate_feedback_batch,
    load_templates,
    render,
    render_report_text,
    report_to_document,
    select_template,
    validate_registry,
)
from .graph import (
    Adg,
    AdgEdge,
    AdgError,
    AdgNode,
    NodeKind,
    RelationLabel,
    RelationStep,
    effective_label,
    load_adg,
    node_paragraph,
    relation_between,
    to_document,
    to_json,
    validate_graph,
)
from .graph import (
    DEFAULT_LABEL_BINDINGS,
    AdgDocumentError,
    AdgSyntaxError,
    UnknownNodeError,
    default_vocabulary,
)
from .stats import (
    PAIR_NAMES,
    AccuracyReport,
    LikertCounts,
    StatsError,
    SummaryStats,
    TestResult,
    Trichotomy,
    Verdict,
    alignment_accuracy,
    chi_square_gof,
    pairwise_trichotomy_tests,
    parse_count_rows,
    parse_summary_rows,
    run_count_table,
    run_likert_table,
    run_summary_table,
    trichotomize,
    two_level_marker,
    verdict_for,
    welch_t,
)
from .validation import Finding, Severity, ValidationReport

__version__ = "0.1.0"

__all__ = [
    "Adg", "AdgDocumentError", "AdgEdge", "AdgError", "AdgNode", "AdgSyntaxError",
    "DEFAULT_LABEL_BINDINGS", "NodeKind", "RelationLabel", "RelationStep",
    "UnknownNodeError", "default_vocabulary", "effective_label", "load_adg",
    "node_paragraph", "relation_between", "to_document", "to_json", "validate_graph",
    "Corpus", "CorpusError", "Criterion", "CriterionResult", "LengthConstraint",
    "PromptSpec", "ScoredResponse", "cue_text", "load_corpus", "load_corpus_path",
    "split_sentences",
    "AlignConfig", "AlignmentError", "AlignmentResult", "CharNgramProvider",
    "DEFAULT_THRESHOLD", "NoCandidatesError", "ProviderUnavailableError",
    "RemoteEmbeddingProvider", "TokenTfidfProvider", "align_cue", "candidate_nodes",
    "cosine", "embed_remote", "ngram_profile", "normalize_text",
    "FeedbackConfig", "FeedbackError", "FeedbackItem", "FeedbackReport",
    "FeedbackTemplate", "SelectionContext", "TemplateRegistry", "generate_feedback",
    "generate_feedback_batch", "load_templates", "render", "render_report_text",
    "report_to_document", "select_template", "validate_registry",
    "AccuracyReport", "LikertCounts", "PAIR_NAMES", "StatsError", "SummaryStats",
    "TestResult", "Trichotomy", "Verdict", "alignment_accuracy", "chi_square_gof",
    "pairwise_trichotomy_tests", "parse_count_rows", "parse_summary_rows",
    "run_count_table", "run_likert_table", "run_summary_table", "trichotomize",
    "two_level_marker", "verdict_for", "welch_t",
    "Finding", "Severity", "ValidationReport",
]
