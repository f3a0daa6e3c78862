"""Conversational question refinement: rewrite the current question so it
stands alone, then distill it into search keywords.

Follow-up questions lean on earlier turns through pronouns and omissions
("When did the battle happen?"), so both steps condition on the conversation
so far. Only the most recent turns are serialized into prompts; typical
conversations fit well inside the window.
"""
from __future__ import annotations

import re

from .backend import (
    Backend,
    BackendRole,
    DEFAULT_TEMPLATES,
    GenerationRequest,
    PromptTemplate,
    timed_generate,
)
from .trace import Trace
from .types import Conversation, KeywordSet, RefinedQuestion

CONTEXT_WINDOW_TURNS = 10

_SPLIT_KEYWORDS = re.compile(r"[;；,，\n]+")

STAGE_REFINE = "refine"
STAGE_EXTRACT = "extract_keywords"


def format_context(conversation: Conversation, max_turns: int = CONTEXT_WINDOW_TURNS) -> str:
    """Serialize the last ``max_turns`` turns as alternating Q:/A: lines."""
    turns = conversation.turns[-max_turns:] if max_turns else conversation.turns
    if not turns:
        return "(no prior turns)"
    lines: list[str] = []
    for turn in turns:
        lines.append(f"Q: {turn.question}")
        lines.append(f"A: {turn.response}")
    return "\n".join(lines)


def reformulate(
    conversation: Conversation,
    question: str,
    backend: Backend,
    template: PromptTemplate | None = None,
    trace: Trace | None = None,
) -> RefinedQuestion:
    """Rewrite ``question`` into a self-contained form.

    The result is the first non-empty line of the model output, trimmed. A
    blank output falls back to the original question; both degradations are
    flagged in the trace. Never returns an empty question.
    """
    if not question.strip():
        raise ValueError("question must be non-empty")
    template = template or DEFAULT_TEMPLATES["reformulate"]
    prompt = template.render({"context": format_context(conversation), "question": question})
    raw = timed_generate(
        backend,
        GenerationRequest(role=BackendRole.REFINER, prompt=prompt),
        trace,
        STAGE_REFINE,
    )
    lines = [line.strip() for line in raw.splitlines() if line.strip()]
    if not lines:
        if trace is not None:
            trace.flag(STAGE_REFINE, "model returned blank reformulation; original question kept")
        text = question.strip()
    else:
        if len(lines) > 1 and trace is not None:
            trace.flag(STAGE_REFINE, "model returned multiple lines; first non-empty line kept")
        text = lines[0]
    return RefinedQuestion(text=text, source_turn_index=len(conversation.turns) + 1)


def extract_keywords(
    conversation: Conversation,
    question: str,
    refined: RefinedQuestion,
    backend: Backend,
    template: PromptTemplate | None = None,
    trace: Trace | None = None,
) -> KeywordSet:
    """Extract search keywords for the refined question.

    An empty extraction yields the refined question itself as the single
    keyword, so retrieval always has a query.
    """
    template = template or DEFAULT_TEMPLATES["extract_keywords"]
    prompt = template.render(
        {
            "context": format_context(conversation),
            "question": question,
            "refined": refined.text,
        }
    )
    raw = timed_generate(
        backend,
        GenerationRequest(role=BackendRole.KEYWORD_EXTRACTOR, prompt=prompt),
        trace,
        STAGE_EXTRACT,
    )
    keywords = parse_keyword_output(raw)
    if not keywords:
        if trace is not None:
            trace.flag(STAGE_EXTRACT, "no keywords extracted; refined question used as query")
        return KeywordSet((refined.text,))
    return keywords


def parse_keyword_output(raw: str) -> KeywordSet:
    """Split model output into keywords.

    The prompt asks for semicolons, but the parser is liberal: semicolons,
    ASCII and fullwidth commas, and newlines all separate terms. Entries are
    trimmed, empties dropped, and duplicates removed keeping first occurrence
    (comparison ignores internal whitespace differences).
    """
    keywords: list[str] = []
    seen: set[str] = set()
    for part in _SPLIT_KEYWORDS.split(raw):
        term = part.strip()
        if not term:
            continue
        norm = " ".join(term.split())
        if norm in seen:
            continue
        seen.add(norm)
        keywords.append(term)
    return KeywordSet(tuple(keywords))
