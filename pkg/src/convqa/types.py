"""Domain value types shared by every pipeline stage.

All types here are frozen dataclasses: safe to share across threads, hashable
where useful, and serializable through their ``to_dict`` methods.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Iterator


def _normalize_ws(text: str) -> str:
    return " ".join(text.split())


@dataclass(frozen=True)
class Turn:
    """One question/response exchange. The response may be empty only while
    the turn is still in progress."""

    question: str
    response: str = ""

    def __post_init__(self):
        if not self.question.strip():
            raise ValueError("turn question must be non-empty")

    def to_dict(self) -> dict[str, str]:
        return {"question": self.question, "response": self.response}

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "Turn":
        return cls(question=data["question"], response=data.get("response", ""))


@dataclass(frozen=True)
class Conversation:
    """An ordered, append-only sequence of turns. A freshly opened session
    starts with zero turns; a recorded conversation has at least one."""

    id: str
    turns: tuple[Turn, ...] = ()

    def __post_init__(self):
        if not self.id:
            raise ValueError("conversation id must be non-empty")

    def extended(self, turn: Turn) -> "Conversation":
        return Conversation(id=self.id, turns=self.turns + (turn,))

    def to_dict(self) -> dict[str, Any]:
        return {"id": self.id, "turns": [t.to_dict() for t in self.turns]}


@dataclass(frozen=True)
class RefinedQuestion:
    """A question rewritten to stand on its own without the conversation.
    ``source_turn_index`` is the 1-based position of the turn it came from."""

    text: str
    source_turn_index: int

    def __post_init__(self):
        if not self.text.strip():
            raise ValueError("refined question must be non-empty")
        if self.source_turn_index < 1:
            raise ValueError("source_turn_index must be >= 1")

    def to_dict(self) -> dict[str, Any]:
        return {"text": self.text, "source_turn_index": self.source_turn_index}


@dataclass(frozen=True)
class KeywordSet:
    """Ordered search terms. Entries are non-empty and unique once whitespace
    is normalized; an empty set is a legal degenerate case."""

    keywords: tuple[str, ...] = ()

    def __post_init__(self):
        seen: set[str] = set()
        for kw in self.keywords:
            if not kw.strip():
                raise ValueError("keywords must be non-empty")
            norm = _normalize_ws(kw)
            if norm in seen:
                raise ValueError(f"duplicate keyword: {kw!r}")
            seen.add(norm)

    def __iter__(self) -> Iterator[str]:
        return iter(self.keywords)

    def __len__(self) -> int:
        return len(self.keywords)

    def __bool__(self) -> bool:
        return bool(self.keywords)

    def to_list(self) -> list[str]:
        return list(self.keywords)


@dataclass(frozen=True)
class Paragraph:
    """One retrieval unit cut out of a document."""

    text: str
    doc_id: str
    index_in_doc: int
    source_url: str | None = None

    def __post_init__(self):
        if not self.text.strip():
            raise ValueError("paragraph text must be non-empty")
        if self.index_in_doc < 0:
            raise ValueError("index_in_doc must be >= 0")

    def to_dict(self) -> dict[str, Any]:
        return {
            "text": self.text,
            "doc_id": self.doc_id,
            "index_in_doc": self.index_in_doc,
            "source_url": self.source_url,
        }


@dataclass(frozen=True)
class ScoredParagraph:
    """A paragraph with its recall score and, once reranked, a rerank score
    and final rank. ``source_order`` is the paragraph's position in the
    document-rank-ordered stream; it makes tie-breaking deterministic even
    after candidates have been reordered by score."""

    paragraph: Paragraph
    recall_score: float
    rerank_score: float | None = None
    final_rank: int | None = None
    source_order: int = 0

    def __post_init__(self):
        if not math.isfinite(self.recall_score):
            raise ValueError("recall_score must be finite")
        if self.rerank_score is not None and not math.isfinite(self.rerank_score):
            raise ValueError("rerank_score must be finite")
        if self.final_rank is not None and self.final_rank < 1:
            raise ValueError("final_rank must be >= 1")

    def to_dict(self) -> dict[str, Any]:
        d = self.paragraph.to_dict()
        d.update(
            recall_score=self.recall_score,
            rerank_score=self.rerank_score,
            final_rank=self.final_rank,
            source_order=self.source_order,
        )
        return d


@dataclass(frozen=True)
class HelpfulnessVerdict:
    """The generator's self-check outcome for one top paragraph."""

    paragraph_rank: int
    helpful: bool
    rationale: str | None = None

    def __post_init__(self):
        if self.paragraph_rank < 1:
            raise ValueError("paragraph_rank must be >= 1")

    def to_dict(self) -> dict[str, Any]:
        return {
            "paragraph_rank": self.paragraph_rank,
            "helpful": self.helpful,
            "rationale": self.rationale,
        }
