"""Self-checked response generation.

A single generation call both judges the helpfulness of each evidence
paragraph and answers the question: the model is asked to emit one verdict
line per paragraph ("[k] helpful" / "[k] not helpful") followed by the
answer after an "ANSWER:" marker. Verdict parsing degrades fail-open — if
the check block is missing or unparseable, every paragraph is kept and the
miss is flagged in the trace, never raised.
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
from .refiner import format_context
from .trace import Trace
from .types import Conversation, HelpfulnessVerdict, ScoredParagraph

ANSWER_MARKER = re.compile(r"^[ \t]*ANSWER[ \t]*:", re.IGNORECASE | re.MULTILINE)
_VERDICT_LINE = re.compile(r"^\s*\[(\d+)\]\s*(helpful|not\s+helpful)\b[ \t]*[-:—,]?\s*(.*)$", re.IGNORECASE)

STAGE_RESPOND = "respond"


def build_evidence_block(paragraphs: list[ScoredParagraph]) -> str:
    """Render the evidence paragraphs as numbered lines for the prompt."""
    if not paragraphs:
        return "(no evidence paragraphs retrieved)"
    lines = ["Evidence paragraphs:"]
    for i, sp in enumerate(paragraphs, start=1):
        rank = sp.final_rank if sp.final_rank is not None else i
        lines.append(f"[{rank}] {sp.paragraph.text}")
    return "\n".join(lines)


def parse_self_check_output(raw: str, expected_count: int) -> tuple[list[HelpfulnessVerdict], str]:
    """Split model output into verdicts and the answer.

    Verdict lines before the ANSWER marker are collected, deduplicated
    keeping the first per rank, restricted to ranks 1..expected_count, and
    sorted by rank. Without a marker, the whole output is the answer and no
    verdicts are reported.
    """
    if expected_count < 0:
        raise ValueError("expected_count must be >= 0")
    marker = ANSWER_MARKER.search(raw)
    if marker is None:
        return [], raw.strip()
    response = raw[marker.end() :].strip()
    verdicts: dict[int, HelpfulnessVerdict] = {}
    for line in raw[: marker.start()].splitlines():
        match = _VERDICT_LINE.match(line)
        if not match:
            continue
        rank = int(match.group(1))
        if rank < 1 or rank > expected_count or rank in verdicts:
            continue
        helpful = match.group(2).lower() == "helpful"
        rationale = match.group(3).strip() or None
        verdicts[rank] = HelpfulnessVerdict(paragraph_rank=rank, helpful=helpful, rationale=rationale)
    ordered = [verdicts[rank] for rank in sorted(verdicts)]
    return ordered, response


def self_check_and_respond(
    conversation: Conversation,
    question: str,
    top_paragraphs: list[ScoredParagraph],
    backend: Backend,
    self_check_enabled: bool = True,
    check_template: PromptTemplate | None = None,
    plain_template: PromptTemplate | None = None,
    trace: Trace | None = None,
) -> tuple[list[HelpfulnessVerdict], str]:
    """Generate verdicts and the answer in one call.

    With self-check disabled the plain prompt is used and the model output is
    returned verbatim with no verdicts.
    """
    if self_check_enabled:
        template = check_template or DEFAULT_TEMPLATES["respond_with_self_check"]
    else:
        template = plain_template or DEFAULT_TEMPLATES["respond_plain"]
    prompt = template.render(
        {
            "context": format_context(conversation),
            "question": question,
            "paragraphs": build_evidence_block(top_paragraphs),
        }
    )
    raw = timed_generate(
        backend,
        GenerationRequest(role=BackendRole.RESPONDER, prompt=prompt),
        trace,
        STAGE_RESPOND,
    )
    if not self_check_enabled:
        return [], raw.strip()
    verdicts, response = parse_self_check_output(raw, expected_count=len(top_paragraphs))
    if top_paragraphs and not verdicts and trace is not None:
        trace.flag(
            STAGE_RESPOND,
            "self-check block missing or unparseable; keeping all paragraphs",
        )
    return verdicts, response


def filter_helpful(
    top_paragraphs: list[ScoredParagraph], verdicts: list[HelpfulnessVerdict]
) -> list[ScoredParagraph]:
    """Paragraphs judged helpful, in their original order.

    Paragraphs without a verdict are kept (fail-open): the self-check exists
    to drop noise, not to gate evidence.
    """
    ranks = {sp.final_rank for sp in top_paragraphs}
    for verdict in verdicts:
        if verdict.paragraph_rank not in ranks:
            raise ValueError(f"verdict rank {verdict.paragraph_rank} not in the paragraph set")
    by_rank = {v.paragraph_rank: v.helpful for v in verdicts}
    return [sp for sp in top_paragraphs if by_rank.get(sp.final_rank, True)]
