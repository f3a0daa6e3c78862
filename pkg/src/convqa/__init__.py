"""Conversation-level retrieval-augmented question answering.

A question refiner rewrites each conversational question into a
self-contained form and extracts search keywords; a staged retriever pulls
documents, recalls candidate paragraphs by embedding similarity, and reranks
them pairwise; the generator self-checks each evidence paragraph before
answering. Batch, HTTP-service, and CLI front ends share the same pipeline.
"""

from .backend import (
    Backend,
    BackendRole,
    DEFAULT_TEMPLATES,
    GenerationRequest,
    HTTPBackend,
    PromptTemplate,
    ScriptedBackend,
    ScriptedRule,
)
from .dataset import (
    DatasetRecord,
    DatasetStats,
    LabeledParagraph,
    dataset_stats,
    load_dataset,
    save_dataset,
    validate_record,
)
from .errors import (
    BackendError,
    ConvQAError,
    DatasetFormatError,
    RetrievalError,
    SessionBusyError,
    SessionNotFoundError,
    StageError,
    TemplateError,
    TransportError,
)
from .generator import filter_helpful, parse_self_check_output, self_check_and_respond
from .harness import JudgeTally, ablation_label, ablation_report, pairwise_judge
from .metrics import (
    MetricReport,
    bleu_n,
    evaluate_run,
    meteor_basic,
    rouge_l,
    rouge_n,
)
from .pipeline import (
    Pipeline,
    PipelineConfig,
    RunOutcome,
    Session,
    TurnResult,
    read_predictions,
    write_predictions,
)
from .refiner import extract_keywords, parse_keyword_output, reformulate
from .retriever import (
    Document,
    EmbeddingModel,
    LexicalRerankScorer,
    OfflineCorpusConnector,
    RemoteRerankScorer,
    RemoteSearchConnector,
    embed,
    recall_score,
    recall_top,
    rerank,
    search_documents,
    segment_paragraphs,
)
from .types import (
    Conversation,
    HelpfulnessVerdict,
    KeywordSet,
    Paragraph,
    RefinedQuestion,
    ScoredParagraph,
    Turn,
)

__version__ = "0.1.0"
