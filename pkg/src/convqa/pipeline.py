"""Per-turn orchestration: refine -> extract -> search -> segment -> recall
-> rerank -> self-check/respond, with ablation switches and a full trace.

Ablation codes (each removes one component):
  ``qf``  skip question refinement; the raw question doubles as the
          reformulation and the only keyword
  ``fr``  skip paragraph-level retrieval; the top documents' snippets stand
          in for the evidence paragraphs
  ``sc``  skip the self-check; respond without verdict instructions

Sessions serialize their turns: a second concurrent request on the same
session is rejected, and a failed turn never mutates the conversation.
"""
from __future__ import annotations

import json
import threading
import uuid
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Mapping

from .backend import Backend, BackendRole, DEFAULT_TEMPLATES, PromptTemplate
from .dataset import DatasetRecord
from .errors import ConvQAError, SessionBusyError, SessionNotFoundError, StageError
from .generator import filter_helpful, self_check_and_respond
from .refiner import extract_keywords, reformulate
from .retriever import (
    DEFAULT_MAX_DOCUMENTS,
    DEFAULT_RECALL_TOP_K,
    DEFAULT_RERANK_TOP_N,
    Document,
    EmbeddingModel,
    RerankScorer,
    SearchConnector,
    recall_top,
    rerank,
    search_documents,
    segment_paragraphs,
)
from .trace import Trace
from .types import (
    Conversation,
    HelpfulnessVerdict,
    KeywordSet,
    Paragraph,
    RefinedQuestion,
    ScoredParagraph,
    Turn,
)

ABLATION_CODES = ("qf", "fr", "sc")


@dataclass(frozen=True)
class PipelineConfig:
    max_documents: int = DEFAULT_MAX_DOCUMENTS
    recall_top_k: int = DEFAULT_RECALL_TOP_K
    rerank_top_n: int = DEFAULT_RERANK_TOP_N
    ablations: frozenset[str] = frozenset()
    tokenizer_mode: str = "unicode"
    score_function: str = "cosine"

    def __post_init__(self):
        if self.rerank_top_n > self.recall_top_k:
            raise ValueError("rerank_top_n must not exceed recall_top_k")
        if self.rerank_top_n < 1 or self.recall_top_k < 1 or self.max_documents < 1:
            raise ValueError("retrieval sizes must be >= 1")
        unknown = set(self.ablations) - set(ABLATION_CODES)
        if unknown:
            raise ValueError(f"unknown ablation codes: {sorted(unknown)}")

    def to_dict(self) -> dict[str, Any]:
        return {
            "max_documents": self.max_documents,
            "recall_top_k": self.recall_top_k,
            "rerank_top_n": self.rerank_top_n,
            "ablations": sorted(self.ablations),
            "tokenizer_mode": self.tokenizer_mode,
            "score_function": self.score_function,
        }


@dataclass
class TurnResult:
    refined_question: RefinedQuestion
    keywords: KeywordSet
    documents_fetched: int
    top_paragraphs: list[ScoredParagraph]
    verdicts: list[HelpfulnessVerdict]
    response: str
    trace: Trace

    def to_dict(self, include_timings: bool = False) -> dict[str, Any]:
        """Canonical serialization; without timings it is byte-stable across
        identical runs."""
        return {
            "refined_question": self.refined_question.to_dict(),
            "keywords": self.keywords.to_list(),
            "documents_fetched": self.documents_fetched,
            "top_paragraphs": [sp.to_dict() for sp in self.top_paragraphs],
            "verdicts": [v.to_dict() for v in self.verdicts],
            "response": self.response,
            "trace": self.trace.to_list(include_timings=include_timings),
        }


@dataclass
class Session:
    """One live conversation. The config is fixed at creation; turns are
    append-only and only appended after a turn fully succeeds."""

    id: str
    conversation: Conversation
    config: PipelineConfig
    lock: threading.Lock = field(default_factory=threading.Lock, repr=False, compare=False)


@dataclass
class RunOutcome:
    """One dataset record's result; failed records carry the error instead."""

    record: DatasetRecord
    result: TurnResult | None = None
    error: str | None = None


class Pipeline:
    """Wires the refiner, retriever, and generator together and owns sessions."""

    def __init__(
        self,
        config: PipelineConfig,
        connector: SearchConnector,
        scorer: RerankScorer,
        embedding_model: EmbeddingModel,
        backends: Mapping[BackendRole, Backend] | Backend,
        templates: Mapping[str, PromptTemplate] | None = None,
    ) -> None:
        self.config = config
        self.connector = connector
        self.scorer = scorer
        self.embedding_model = embedding_model
        if isinstance(backends, Mapping):
            self.backends = dict(backends)
        else:
            self.backends = {role: backends for role in BackendRole}
        self.templates = dict(DEFAULT_TEMPLATES)
        if templates:
            self.templates.update(templates)
        self.sessions: dict[str, Session] = {}
        self._sessions_lock = threading.Lock()

    def _backend(self, role: BackendRole) -> Backend:
        try:
            return self.backends[role]
        except KeyError:
            raise ConvQAError(f"no backend configured for role {role.value}") from None

    # -- sessions ----------------------------------------------------------

    def create_session(self, session_id: str | None = None) -> Session:
        session_id = session_id or uuid.uuid4().hex
        session = Session(
            id=session_id,
            conversation=Conversation(id=session_id),
            config=self.config,
        )
        with self._sessions_lock:
            if session_id in self.sessions:
                raise ConvQAError(f"session {session_id!r} already exists")
            self.sessions[session_id] = session
        return session

    def get_session(self, session_id: str) -> Session:
        try:
            return self.sessions[session_id]
        except KeyError:
            raise SessionNotFoundError(f"unknown session {session_id!r}") from None

    def snapshot_sessions(self, path: str | Path) -> int:
        """Persist every session's transcript to a JSON file."""
        data = [
            {"id": s.id, "turns": [t.to_dict() for t in s.conversation.turns]}
            for s in self.sessions.values()
        ]
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(data, fh, ensure_ascii=False)
        return len(data)

    def restore_sessions(self, path: str | Path) -> int:
        """Recreate sessions from a snapshot file, if one exists."""
        path = Path(path)
        if not path.exists():
            return 0
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
        for item in data:
            session = self.create_session(item["id"])
            session.conversation = Conversation(
                id=item["id"], turns=tuple(Turn.from_dict(t) for t in item["turns"])
            )
        return len(data)

    def answer_turn(self, session: Session | str, question: str) -> TurnResult:
        """Run one full turn on a session and append it to the conversation.

        Turns on one session are strictly serialized: if another turn is in
        flight, this raises SessionBusyError instead of waiting.
        """
        if isinstance(session, str):
            session = self.get_session(session)
        if not session.lock.acquire(blocking=False):
            raise SessionBusyError(f"session {session.id!r} is already answering a turn")
        try:
            result = self.execute_turn(session.conversation, question, session.config)
            session.conversation = session.conversation.extended(
                Turn(question=question, response=result.response)
            )
            return result
        finally:
            session.lock.release()

    # -- the pipeline proper -----------------------------------------------

    def execute_turn(
        self, conversation: Conversation, question: str, config: PipelineConfig | None = None
    ) -> TurnResult:
        """Answer one question against a conversation without touching any
        session state. Errors are wrapped per stage."""
        if not question.strip():
            raise ValueError("question must be non-empty")
        config = config or self.config
        trace = Trace()

        refined, keywords = self._refine(conversation, question, config, trace)
        documents = self._run_stage(
            trace, "search", lambda: search_documents(keywords, self.connector, trace)
        )
        top_paragraphs = self._retrieve(refined, keywords, documents, config, trace)
        verdicts, response = self._respond(conversation, question, top_paragraphs, config, trace)

        return TurnResult(
            refined_question=refined,
            keywords=keywords,
            documents_fetched=len(documents),
            top_paragraphs=top_paragraphs,
            verdicts=verdicts,
            response=response,
            trace=trace,
        )

    def _run_stage(self, trace: Trace, name: str, body):
        try:
            with trace.stage(name):
                return body()
        except ConvQAError as exc:
            raise StageError(name, exc) from exc

    def _refine(
        self,
        conversation: Conversation,
        question: str,
        config: PipelineConfig,
        trace: Trace,
    ) -> tuple[RefinedQuestion, KeywordSet]:
        if "qf" in config.ablations:
            trace.ablated("refine", "question refinement disabled; raw question kept")
            trace.ablated("extract_keywords", "keyword extraction disabled; raw question is the query")
            refined = RefinedQuestion(
                text=question.strip(), source_turn_index=len(conversation.turns) + 1
            )
            return refined, KeywordSet((question.strip(),))
        refined = self._run_stage(
            trace,
            "refine",
            lambda: reformulate(
                conversation,
                question,
                self._backend(BackendRole.REFINER),
                self.templates["reformulate"],
                trace,
            ),
        )
        keywords = self._run_stage(
            trace,
            "extract_keywords",
            lambda: extract_keywords(
                conversation,
                question,
                refined,
                self._backend(BackendRole.KEYWORD_EXTRACTOR),
                self.templates["extract_keywords"],
                trace,
            ),
        )
        return refined, keywords

    def _retrieve(
        self,
        refined: RefinedQuestion,
        keywords: KeywordSet,
        documents: list[Document],
        config: PipelineConfig,
        trace: Trace,
    ) -> list[ScoredParagraph]:
        if "fr" in config.ablations:
            trace.ablated("segment", "paragraph retrieval disabled")
            trace.ablated("recall", "paragraph retrieval disabled")
            trace.ablated("rerank", "evidence taken from document snippets instead")
            return self._snippets_as_evidence(documents, config.rerank_top_n)
        paragraphs = self._run_stage(
            trace,
            "segment",
            lambda: [
                p
                for doc in documents
                for p in segment_paragraphs(doc, tokenizer_mode=config.tokenizer_mode)
            ],
        )
        candidates = self._run_stage(
            trace,
            "recall",
            lambda: recall_top(
                refined,
                keywords,
                paragraphs,
                self.embedding_model,
                k=config.recall_top_k,
                score_function=config.score_function,
                tokenizer_mode=config.tokenizer_mode,
            ),
        )
        return self._run_stage(
            trace,
            "rerank",
            lambda: rerank(refined, candidates, self.scorer, config.rerank_top_n, trace),
        )

    @staticmethod
    def _snippets_as_evidence(documents: list[Document], top_n: int) -> list[ScoredParagraph]:
        """Stand-in evidence when paragraph retrieval is ablated: the snippet
        of each top document, or its first paragraph when no snippet exists."""
        evidence: list[ScoredParagraph] = []
        for doc in documents[:top_n]:
            text = (doc.snippet or "").strip()
            if not text:
                first = segment_paragraphs(doc)
                if not first:
                    continue
                text = first[0].text
            evidence.append(
                ScoredParagraph(
                    paragraph=Paragraph(
                        text=text,
                        doc_id=doc.doc_id,
                        index_in_doc=0,
                        source_url=doc.source_url,
                    ),
                    recall_score=0.0,
                    final_rank=len(evidence) + 1,
                    source_order=doc.rank - 1,
                )
            )
        return evidence

    def _respond(
        self,
        conversation: Conversation,
        question: str,
        top_paragraphs: list[ScoredParagraph],
        config: PipelineConfig,
        trace: Trace,
    ) -> tuple[list[HelpfulnessVerdict], str]:
        self_check = "sc" not in config.ablations
        if self_check:
            trace.add("self_check", "stage", detail="verdict instructions active")
        else:
            trace.ablated("self_check", "self-check disabled; plain response prompt")
        verdicts, response = self._run_stage(
            trace,
            "respond",
            lambda: self_check_and_respond(
                conversation,
                question,
                top_paragraphs,
                self._backend(BackendRole.RESPONDER),
                self_check_enabled=self_check,
                check_template=self.templates["respond_with_self_check"],
                plain_template=self.templates["respond_plain"],
                trace=trace,
            ),
        )
        if self_check:
            helpful = filter_helpful(top_paragraphs, verdicts)
            trace.info(
                "respond",
                "helpful evidence ranks: "
                + (",".join(str(sp.final_rank) for sp in helpful) or "none"),
            )
        return verdicts, response

    # -- batch mode ----------------------------------------------------------

    def run_dataset(self, records: Iterable[DatasetRecord]) -> list[RunOutcome]:
        """Answer every record using its stored context as the session
        history. Failures are recorded per record; the run continues."""
        outcomes: list[RunOutcome] = []
        for record in records:
            conversation = Conversation(
                id=f"{record.conv_id}#{record.turn_index}", turns=record.context
            )
            try:
                result = self.execute_turn(conversation, record.question)
                outcomes.append(RunOutcome(record=record, result=result))
            except ConvQAError as exc:
                outcomes.append(RunOutcome(record=record, error=str(exc)))
        return outcomes


def write_predictions(outcomes: Iterable[RunOutcome], path: str | Path) -> None:
    """One JSON line per answered record. Trace timings are excluded so the
    file is byte-identical across identical runs."""
    with open(path, "w", encoding="utf-8") as fh:
        for outcome in outcomes:
            line: dict[str, Any] = {
                "conv_id": outcome.record.conv_id,
                "turn_index": outcome.record.turn_index,
                "question": outcome.record.question,
            }
            if outcome.result is not None:
                line["result"] = outcome.result.to_dict(include_timings=False)
            else:
                line["error"] = outcome.error
            fh.write(json.dumps(line, ensure_ascii=False))
            fh.write("\n")


def read_predictions(path: str | Path) -> list[dict[str, Any]]:
    with open(path, encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]
