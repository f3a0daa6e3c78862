import pytest
from hypothesis import given
from hypothesis import strategies as st

from convqa.backend import BackendRole, ScriptedBackend
from convqa.errors import BackendError
from convqa.generator import (
    build_evidence_block,
    filter_helpful,
    parse_self_check_output,
    self_check_and_respond,
)
from convqa.trace import FLAG, Trace
from convqa.types import Conversation, HelpfulnessVerdict, Paragraph, ScoredParagraph

from conftest import RecordingBackend


def top(*texts):
    return [
        ScoredParagraph(
            paragraph=Paragraph(text=text, doc_id="d", index_in_doc=i),
            recall_score=1.0 - i * 0.1,
            rerank_score=0.5,
            final_rank=i + 1,
            source_order=i,
        )
        for i, text in enumerate(texts)
    ]


# -- parse_self_check_output ---------------------------------------------------


def test_parse_simple_verdict_and_answer():
    verdicts, response = parse_self_check_output("[1] helpful\nANSWER: x", expected_count=1)
    assert [(v.paragraph_rank, v.helpful) for v in verdicts] == [(1, True)]
    assert response == "x"


def test_parse_no_structure_falls_back_to_whole_text():
    raw = "no structure at all"
    verdicts, response = parse_self_check_output(raw, expected_count=2)
    assert verdicts == []
    assert response == "no structure at all"


def test_parse_out_of_order_verdicts_sorted():
    raw = "[2] not helpful\n[1] helpful\nANSWER: done"
    verdicts, _ = parse_self_check_output(raw, expected_count=2)
    assert [(v.paragraph_rank, v.helpful) for v in verdicts] == [(1, True), (2, False)]


def test_parse_duplicate_rank_keeps_first():
    raw = "[1] helpful\n[1] not helpful\nANSWER: x"
    verdicts, _ = parse_self_check_output(raw, expected_count=1)
    assert [(v.paragraph_rank, v.helpful) for v in verdicts] == [(1, True)]


def test_parse_out_of_range_rank_dropped():
    raw = "[1] helpful\n[7] not helpful\nANSWER: x"
    verdicts, _ = parse_self_check_output(raw, expected_count=2)
    assert [v.paragraph_rank for v in verdicts] == [1]


def test_parse_captures_rationale():
    raw = "[1] helpful - gives the exact date\nANSWER: 630 CE"
    verdicts, _ = parse_self_check_output(raw, expected_count=1)
    assert verdicts[0].rationale == "gives the exact date"


def test_parse_multiline_answer():
    raw = "[1] helpful\nANSWER: first line\nsecond line"
    _, response = parse_self_check_output(raw, expected_count=1)
    assert response == "first line\nsecond line"


def test_parse_not_helpful_spacing_and_case():
    raw = "[1] Not Helpful\n[2] HELPFUL\nanswer: ok"
    verdicts, response = parse_self_check_output(raw, expected_count=2)
    assert [(v.paragraph_rank, v.helpful) for v in verdicts] == [(1, False), (2, True)]
    assert response == "ok"


def test_parse_negative_expected_count_rejected():
    with pytest.raises(ValueError):
        parse_self_check_output("x", expected_count=-1)


# -- self_check_and_respond ----------------------------------------------------


def test_mixed_verdicts_parsed_from_scripted_output():
    backend = ScriptedBackend()
    backend.add_rule("When", "[1] helpful\n[2] not helpful\nANSWER: In 630 CE.")
    verdicts, response = self_check_and_respond(
        Conversation(id="c"),
        "When did the battle happen?",
        top("p one", "p two"),
        backend,
    )
    assert [(v.paragraph_rank, v.helpful) for v in verdicts] == [(1, True), (2, False)]
    assert response == "In 630 CE."


def test_empty_evidence_no_block_in_prompt():
    backend = RecordingBackend(ScriptedBackend())
    backend.inner.add_rule("question", "ANSWER: from model knowledge")
    verdicts, response = self_check_and_respond(
        Conversation(id="c"), "a question", [], backend
    )
    assert verdicts == []
    assert response == "from model knowledge"
    assert "[1]" not in backend.prompts[0].split("If evidence")[0]
    assert "no evidence paragraphs retrieved" in backend.prompts[0]


def test_self_check_disabled_returns_verbatim():
    backend = ScriptedBackend()
    backend.add_rule("question", "  The whole scripted answer, unparsed. ")
    verdicts, response = self_check_and_respond(
        Conversation(id="c"), "a question", top("p"), backend, self_check_enabled=False
    )
    assert verdicts == []
    assert response == "The whole scripted answer, unparsed."


def test_unparseable_check_block_degrades_with_flag():
    backend = ScriptedBackend()
    backend.add_rule("question", "just text, no verdicts, no marker")
    trace = Trace()
    verdicts, response = self_check_and_respond(
        Conversation(id="c"), "a question", top("p1", "p2"), backend, trace=trace
    )
    assert verdicts == []
    assert response == "just text, no verdicts, no marker"
    assert any(e.kind == FLAG and "self-check" in e.detail for e in trace.events)


def test_backend_failure_carries_responder_role():
    with pytest.raises(BackendError) as err:
        self_check_and_respond(Conversation(id="c"), "q?", [], ScriptedBackend())
    assert err.value.role == BackendRole.RESPONDER.value


def test_evidence_block_uses_final_ranks():
    block = build_evidence_block(top("alpha", "beta"))
    assert "[1] alpha" in block
    assert "[2] beta" in block


# -- filter_helpful -----------------------------------------------------------


def verdicts_for(*pairs):
    return [HelpfulnessVerdict(paragraph_rank=r, helpful=h) for r, h in pairs]


def test_filter_all_helpful_is_identity():
    paragraphs = top("a", "b")
    result = filter_helpful(paragraphs, verdicts_for((1, True), (2, True)))
    assert result == paragraphs


def test_filter_all_unhelpful_is_empty():
    assert filter_helpful(top("a", "b"), verdicts_for((1, False), (2, False))) == []


def test_filter_mixed_keeps_exact_subset_in_order():
    paragraphs = top("a", "b", "c")
    result = filter_helpful(paragraphs, verdicts_for((1, True), (2, False), (3, True)))
    assert [sp.paragraph.text for sp in result] == ["a", "c"]


def test_filter_missing_verdict_fails_open():
    paragraphs = top("a", "b")
    result = filter_helpful(paragraphs, verdicts_for((2, False),))
    assert [sp.paragraph.text for sp in result] == ["a"]


def test_filter_rejects_rank_outside_set():
    with pytest.raises(ValueError):
        filter_helpful(top("a"), verdicts_for((9, True),))


@given(st.lists(st.booleans(), min_size=0, max_size=6))
def test_filter_output_is_subsequence(flags):
    paragraphs = top(*[f"paragraph {i}" for i in range(len(flags))])
    verdicts = verdicts_for(*[(i + 1, flag) for i, flag in enumerate(flags)])
    result = filter_helpful(paragraphs, verdicts)
    texts = [sp.paragraph.text for sp in paragraphs]
    positions = [texts.index(sp.paragraph.text) for sp in result]
    assert positions == sorted(positions)
    assert all(flags[p] for p in positions)
