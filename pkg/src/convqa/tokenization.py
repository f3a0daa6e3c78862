"""Tokenization shared by dataset statistics, retrieval scoring, and metrics.

The corpora this engine targets mix Chinese and Latin-script text, so the
default ``unicode`` mode counts every CJK codepoint as its own token, keeps
contiguous Latin/digit runs together, and emits each remaining non-space
character (punctuation) as a single token. The ``whitespace`` mode simply
splits on whitespace, for callers that want classic word-level behavior.
"""
from __future__ import annotations

import re
import unicodedata

TOKENIZER_MODES = ("unicode", "whitespace")

# Main ideograph blocks; kana included so Japanese text degrades sanely.
_CJK_RANGES = (
    (0x3040, 0x30FF),   # hiragana + katakana
    (0x3400, 0x4DBF),   # CJK extension A
    (0x4E00, 0x9FFF),   # CJK unified ideographs
    (0xF900, 0xFAFF),   # CJK compatibility ideographs
    (0x20000, 0x2A6DF), # CJK extension B
)

_WS_RUN = re.compile(r"\S+")


def is_cjk(ch: str) -> bool:
    code = ord(ch)
    return any(lo <= code <= hi for lo, hi in _CJK_RANGES)


def _is_word_char(ch: str) -> bool:
    if ch == "_":
        return True
    return unicodedata.category(ch)[0] in ("L", "N")


def token_spans(text: str, mode: str = "unicode") -> list[tuple[int, int]]:
    """Return (start, end) spans of tokens in ``text``, left to right.

    Spans never overlap and never cover whitespace, so cutting text at span
    starts is always safe: it cannot split a token in half.
    """
    if mode == "whitespace":
        return [m.span() for m in _WS_RUN.finditer(text)]
    if mode != "unicode":
        raise ValueError(f"unknown tokenizer mode: {mode!r}")

    spans: list[tuple[int, int]] = []
    run_start: int | None = None
    for i, ch in enumerate(text):
        if ch.isspace():
            if run_start is not None:
                spans.append((run_start, i))
                run_start = None
        elif is_cjk(ch):
            if run_start is not None:
                spans.append((run_start, i))
                run_start = None
            spans.append((i, i + 1))
        elif _is_word_char(ch):
            if run_start is None:
                run_start = i
        else:
            if run_start is not None:
                spans.append((run_start, i))
                run_start = None
            spans.append((i, i + 1))
    if run_start is not None:
        spans.append((run_start, len(text)))
    return spans


def tokenize(text: str, mode: str = "unicode") -> list[str]:
    return [text[a:b] for a, b in token_spans(text, mode)]


def count_tokens(text: str, mode: str = "unicode") -> int:
    return len(token_spans(text, mode))


def ngrams(tokens: list[str], n: int) -> list[tuple[str, ...]]:
    if n < 1:
        raise ValueError("n must be >= 1")
    return [tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1)]
