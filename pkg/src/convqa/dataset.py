"""Annotated conversation dataset: file format, validation, and statistics.

Records live one per line as UTF-8 JSON objects. Each record captures a
single conversation turn together with its annotations: the conversation so
far, the current question, its self-contained reformulation, extracted
keywords, labeled evidence paragraphs, and the reference response.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterable

from .errors import DatasetFormatError
from .tokenization import count_tokens
from .types import Turn

# Three annotators label each paragraph; 2+ "useful" votes make it helpful.
VOTE_POOL = 3
MAJORITY = 2

_RECORD_FIELDS = {
    "conv_id",
    "turn_index",
    "context",
    "question",
    "reformulated_question",
    "keywords",
    "paragraphs",
    "reference_response",
}


@dataclass(frozen=True)
class LabeledParagraph:
    """An evidence paragraph with its human helpfulness label. ``votes`` is
    the number of annotators (out of 3) who found it useful; it may be absent
    when only the majority label was released."""

    text: str
    helpful: bool
    source_url: str | None = None
    votes: int | None = None

    def to_dict(self) -> dict[str, Any]:
        d: dict[str, Any] = {"text": self.text, "helpful": self.helpful}
        if self.source_url is not None:
            d["source_url"] = self.source_url
        if self.votes is not None:
            d["votes"] = self.votes
        return d


@dataclass(frozen=True)
class DatasetRecord:
    """One annotated conversation turn."""

    conv_id: str
    turn_index: int
    context: tuple[Turn, ...]
    question: str
    reformulated_question: str
    keywords: tuple[str, ...]
    paragraphs: tuple[LabeledParagraph, ...]
    reference_response: str

    def to_dict(self) -> dict[str, Any]:
        return {
            "conv_id": self.conv_id,
            "turn_index": self.turn_index,
            "context": [t.to_dict() for t in self.context],
            "question": self.question,
            "reformulated_question": self.reformulated_question,
            "keywords": list(self.keywords),
            "paragraphs": [p.to_dict() for p in self.paragraphs],
            "reference_response": self.reference_response,
        }


@dataclass(frozen=True)
class DatasetStats:
    num_conversations: int
    turns_per_conv: float
    tokens_per_turn: float
    keywords_per_refined_q: float
    paragraphs_per_refined_q: float

    def to_dict(self) -> dict[str, float]:
        return {
            "num_conversations": self.num_conversations,
            "turns_per_conv": self.turns_per_conv,
            "tokens_per_turn": self.tokens_per_turn,
            "keywords_per_refined_q": self.keywords_per_refined_q,
            "paragraphs_per_refined_q": self.paragraphs_per_refined_q,
        }


def _expect(data: dict[str, Any], name: str, kind: type, line_no: int) -> Any:
    if name not in data:
        raise DatasetFormatError(f"field '{name}' missing", line_no)
    value = data[name]
    if kind is float and isinstance(value, int):
        value = float(value)
    if not isinstance(value, kind) or (kind is int and isinstance(value, bool)):
        raise DatasetFormatError(
            f"field '{name}' must be {kind.__name__}, got {type(value).__name__}", line_no
        )
    return value


def _parse_record(data: dict[str, Any], line_no: int) -> DatasetRecord:
    unknown = set(data) - _RECORD_FIELDS
    if unknown:
        raise DatasetFormatError(f"unknown field '{sorted(unknown)[0]}'", line_no)

    context_raw = _expect(data, "context", list, line_no)
    context: list[Turn] = []
    for i, item in enumerate(context_raw):
        if not isinstance(item, dict) or "question" not in item:
            raise DatasetFormatError(f"field 'context[{i}]' must be a turn object", line_no)
        try:
            context.append(Turn(question=item["question"], response=item.get("response", "")))
        except (TypeError, ValueError) as exc:
            raise DatasetFormatError(f"field 'context[{i}]': {exc}", line_no) from exc

    paragraphs_raw = _expect(data, "paragraphs", list, line_no)
    paragraphs: list[LabeledParagraph] = []
    for i, item in enumerate(paragraphs_raw):
        if not isinstance(item, dict) or "text" not in item or "helpful" not in item:
            raise DatasetFormatError(
                f"field 'paragraphs[{i}]' must carry 'text' and 'helpful'", line_no
            )
        paragraphs.append(
            LabeledParagraph(
                text=item["text"],
                helpful=bool(item["helpful"]),
                source_url=item.get("source_url"),
                votes=item.get("votes"),
            )
        )

    keywords_raw = _expect(data, "keywords", list, line_no)
    for i, kw in enumerate(keywords_raw):
        if not isinstance(kw, str):
            raise DatasetFormatError(f"field 'keywords[{i}]' must be a string", line_no)

    return DatasetRecord(
        conv_id=_expect(data, "conv_id", str, line_no),
        turn_index=_expect(data, "turn_index", int, line_no),
        context=tuple(context),
        question=_expect(data, "question", str, line_no),
        reformulated_question=_expect(data, "reformulated_question", str, line_no),
        keywords=tuple(keywords_raw),
        paragraphs=tuple(paragraphs),
        reference_response=_expect(data, "reference_response", str, line_no),
    )


def validate_record(record: DatasetRecord) -> list[str]:
    """Check every record invariant; returns one message per violation.

    Violations are data, not errors: an empty list means the record is valid.
    """
    violations: list[str] = []
    if record.turn_index != len(record.context) + 1:
        violations.append(
            f"turn_index must be len(context)+1 "
            f"(got {record.turn_index}, context has {len(record.context)} turns)"
        )
    if not record.question.strip():
        violations.append("question is empty")
    if not record.reformulated_question.strip():
        violations.append("reformulated_question is empty")
    for i, turn in enumerate(record.context):
        if not turn.response.strip():
            violations.append(f"context[{i}] has an empty response in a completed turn")
    for i, kw in enumerate(record.keywords):
        if not kw.strip():
            violations.append(f"keywords[{i}] is empty")
    for i, para in enumerate(record.paragraphs):
        if not para.text.strip():
            violations.append(f"paragraphs[{i}] text is empty")
        if para.votes is not None:
            if not (0 <= para.votes <= VOTE_POOL):
                violations.append(f"paragraphs[{i}] votes out of range 0..{VOTE_POOL}")
            elif para.helpful != (para.votes >= MAJORITY):
                violations.append("helpful label contradicts majority vote")
    return violations


def load_dataset(path: str | Path) -> list[DatasetRecord]:
    """Load a line-delimited record file, validating every record.

    Raises DatasetFormatError naming the offending line on malformed lines,
    invalid records, or duplicated (conv_id, turn_index) pairs.
    """
    records: list[DatasetRecord] = []
    seen: set[tuple[str, int]] = set()
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                data = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DatasetFormatError(f"not valid JSON ({exc.msg})", line_no) from exc
            if not isinstance(data, dict):
                raise DatasetFormatError("record must be a JSON object", line_no)
            record = _parse_record(data, line_no)
            violations = validate_record(record)
            if violations:
                raise DatasetFormatError(
                    f"record ({record.conv_id}, turn {record.turn_index}) invalid: "
                    + "; ".join(violations),
                    line_no,
                )
            key = (record.conv_id, record.turn_index)
            if key in seen:
                raise DatasetFormatError(
                    f"duplicate record for ({record.conv_id}, turn {record.turn_index})", line_no
                )
            seen.add(key)
            records.append(record)
    return records


def save_dataset(records: Iterable[DatasetRecord], path: str | Path) -> None:
    """Write records one JSON object per line; loading it back reproduces
    every field byte for byte (non-ASCII text is written raw)."""
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record.to_dict(), ensure_ascii=False))
            fh.write("\n")


def dataset_stats(records: list[DatasetRecord], tokenizer_mode: str = "unicode") -> DatasetStats:
    """Aggregate statistics over a record set.

    Definitions: a conversation's turn count is the deepest turn_index among
    its records; tokens/turn averages question+response token counts over the
    turns of each conversation's deepest record (its context plus the current
    turn, completed by the reference response); keywords and paragraphs are
    averaged over records. All averages use plain sum/len so they are
    invariant under record reordering.
    """
    if not records:
        raise DatasetFormatError("no records")

    deepest: dict[str, DatasetRecord] = {}
    for record in records:
        current = deepest.get(record.conv_id)
        if current is None or record.turn_index > current.turn_index:
            deepest[record.conv_id] = record

    turn_counts = [r.turn_index for r in deepest.values()]
    token_counts: list[int] = []
    for record in deepest.values():
        turns = list(record.context) + [Turn(record.question, record.reference_response)]
        for turn in turns:
            token_counts.append(
                count_tokens(turn.question, tokenizer_mode)
                + count_tokens(turn.response, tokenizer_mode)
            )

    return DatasetStats(
        num_conversations=len(deepest),
        turns_per_conv=sum(turn_counts) / len(turn_counts),
        tokens_per_turn=sum(token_counts) / len(token_counts),
        keywords_per_refined_q=sum(len(r.keywords) for r in records) / len(records),
        paragraphs_per_refined_q=sum(len(r.paragraphs) for r in records) / len(records),
    )


def render_stats_report(stats: DatasetStats) -> str:
    rows = [
        ("conversations", f"{stats.num_conversations}"),
        ("turns/conversation", f"{stats.turns_per_conv:.2f}"),
        ("tokens/turn", f"{stats.tokens_per_turn:.2f}"),
        ("keywords/question", f"{stats.keywords_per_refined_q:.2f}"),
        ("paragraphs/question", f"{stats.paragraphs_per_refined_q:.2f}"),
    ]
    width = max(len(name) for name, _ in rows)
    return "\n".join(f"{name:<{width}}  {value:>8}" for name, value in rows)
