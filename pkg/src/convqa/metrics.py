"""Text generation metrics: BLEU, ROUGE, and an exact-match METEOR variant.

All metrics share the engine's tokenizer (character-level for CJK, word
level for Latin runs by default), return values in [0, 1], and score 0 for
an empty candidate. Published numbers from other toolkits will not match
bit-exactly: BLEU here is cumulative and unsmoothed, ROUGE is F1, and METEOR
skips the stem/synonym stages (no external lexical resources).
"""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Any, Sequence

from .errors import ConvQAError
from .tokenization import ngrams, tokenize

METRIC_KEYS = ("bleu_1", "bleu_2", "bleu_3", "bleu_4", "meteor", "rouge_1", "rouge_2", "rouge_l")

# METEOR constants: recall weighted 9:1 in the harmonic mean; fragmentation
# penalty 0.5 * (chunks / matches)^3.
_METEOR_ALPHA = 0.9
_PENALTY_WEIGHT = 0.5
_PENALTY_POWER = 3


def _modified_precision(candidate: list[str], reference: list[str], n: int) -> tuple[int, int]:
    """Clipped n-gram matches and total candidate n-grams."""
    cand_counts = Counter(ngrams(candidate, n))
    ref_counts = Counter(ngrams(reference, n))
    matched = sum(min(count, ref_counts[gram]) for gram, count in cand_counts.items())
    return matched, max(sum(cand_counts.values()), 0)


def bleu_n(candidate: str, reference: str, n: int, tokenizer_mode: str = "unicode") -> float:
    """Cumulative BLEU up to order ``n`` with uniform weights and the usual
    brevity penalty. Unsmoothed: any zero precision zeroes the score. Orders
    where neither side has any n-gram (texts shorter than the order) are
    vacuous and skipped, so identical texts always score 1."""
    if not 1 <= n <= 4:
        raise ValueError("n must be in 1..4")
    cand = tokenize(candidate, tokenizer_mode)
    ref = tokenize(reference, tokenizer_mode)
    if not cand or not ref:
        return 0.0
    log_sum = 0.0
    for order in range(1, n + 1):
        matched, total = _modified_precision(cand, ref, order)
        if total == 0:
            if len(ref) < order:
                continue
            return 0.0
        if matched == 0:
            return 0.0
        log_sum += math.log(matched / total) / n
    brevity = 1.0 if len(cand) > len(ref) else math.exp(1.0 - len(ref) / len(cand))
    return min(1.0, brevity * math.exp(log_sum))


def _f1(precision: float, recall: float) -> float:
    if precision + recall == 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def rouge_n(candidate: str, reference: str, n: int, tokenizer_mode: str = "unicode") -> float:
    """N-gram overlap F1 (clipped counts)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    cand = tokenize(candidate, tokenizer_mode)
    ref = tokenize(reference, tokenizer_mode)
    cand_grams = Counter(ngrams(cand, n))
    ref_grams = Counter(ngrams(ref, n))
    if not cand_grams or not ref_grams:
        return 0.0
    overlap = sum(min(count, ref_grams[gram]) for gram, count in cand_grams.items())
    precision = overlap / sum(cand_grams.values())
    recall = overlap / sum(ref_grams.values())
    return _f1(precision, recall)


def _lcs_length(a: Sequence[str], b: Sequence[str]) -> int:
    if not a or not b:
        return 0
    previous = [0] * (len(b) + 1)
    for token_a in a:
        current = [0] * (len(b) + 1)
        for j, token_b in enumerate(b, start=1):
            if token_a == token_b:
                current[j] = previous[j - 1] + 1
            else:
                current[j] = max(previous[j], current[j - 1])
        previous = current
    return previous[-1]


def rouge_l(candidate: str, reference: str, tokenizer_mode: str = "unicode") -> float:
    """Longest-common-subsequence F1."""
    cand = tokenize(candidate, tokenizer_mode)
    ref = tokenize(reference, tokenizer_mode)
    if not cand or not ref:
        return 0.0
    lcs = _lcs_length(cand, ref)
    return _f1(lcs / len(cand), lcs / len(ref))


def _meteor_alignment(cand: list[str], ref: list[str]) -> tuple[int, int]:
    """Exact unigram alignment: each candidate token takes the earliest
    unused matching reference position, left to right. Returns (matches,
    chunks) where a chunk is a maximal run of candidate matches mapping to
    consecutive reference positions."""
    used = [False] * len(ref)
    positions_by_token: dict[str, list[int]] = {}
    for i, token in enumerate(ref):
        positions_by_token.setdefault(token, []).append(i)
    next_index: dict[str, int] = {token: 0 for token in positions_by_token}

    mapping: list[int] = []
    for token in cand:
        positions = positions_by_token.get(token)
        if positions is None:
            continue
        i = next_index[token]
        while i < len(positions) and used[positions[i]]:
            i += 1
        next_index[token] = i
        if i < len(positions):
            used[positions[i]] = True
            next_index[token] = i + 1
            mapping.append(positions[i])

    matches = len(mapping)
    chunks = 0
    previous = None
    for position in mapping:
        if previous is None or position != previous + 1:
            chunks += 1
        previous = position
    return matches, chunks


def meteor_basic(candidate: str, reference: str, tokenizer_mode: str = "unicode") -> float:
    """Exact-match METEOR: recall-weighted harmonic mean of unigram precision
    and recall, discounted by the fragmentation penalty."""
    cand = tokenize(candidate, tokenizer_mode)
    ref = tokenize(reference, tokenizer_mode)
    if not cand or not ref:
        return 0.0
    matches, chunks = _meteor_alignment(cand, ref)
    if matches == 0:
        return 0.0
    precision = matches / len(cand)
    recall = matches / len(ref)
    # recall weighted 9:1: equals 10PR / (R + 9P)
    f_mean = precision * recall / (_METEOR_ALPHA * precision + (1 - _METEOR_ALPHA) * recall)
    penalty = _PENALTY_WEIGHT * (chunks / matches) ** _PENALTY_POWER
    return f_mean * (1.0 - penalty)


def score_pair(candidate: str, reference: str, tokenizer_mode: str = "unicode") -> dict[str, float]:
    scores = {f"bleu_{n}": bleu_n(candidate, reference, n, tokenizer_mode) for n in range(1, 5)}
    scores["meteor"] = meteor_basic(candidate, reference, tokenizer_mode)
    scores["rouge_1"] = rouge_n(candidate, reference, 1, tokenizer_mode)
    scores["rouge_2"] = rouge_n(candidate, reference, 2, tokenizer_mode)
    scores["rouge_l"] = rouge_l(candidate, reference, tokenizer_mode)
    return scores


@dataclass(frozen=True)
class MetricReport:
    """Per-example scores plus corpus-level aggregates (plain means)."""

    per_example: tuple[dict[str, float], ...]
    aggregates: dict[str, float]

    @property
    def count(self) -> int:
        return len(self.per_example)

    def to_dict(self) -> dict[str, Any]:
        return {
            "count": self.count,
            "aggregates": self.aggregates,
            "per_example": list(self.per_example),
        }


def evaluate_run(
    predictions: Sequence[str], references: Sequence[str], tokenizer_mode: str = "unicode"
) -> MetricReport:
    """Score aligned prediction/reference lists and average every metric."""
    if len(predictions) != len(references):
        raise ConvQAError(
            f"predictions and references differ in length: "
            f"{len(predictions)} vs {len(references)}"
        )
    if not predictions:
        raise ConvQAError("nothing to evaluate")
    per_example = tuple(
        score_pair(cand, ref, tokenizer_mode) for cand, ref in zip(predictions, references)
    )
    aggregates = {
        key: sum(example[key] for example in per_example) / len(per_example)
        for key in METRIC_KEYS
    }
    return MetricReport(per_example=per_example, aggregates=aggregates)


def render_metric_report(report: MetricReport) -> str:
    """Aligned-column text report; values are scaled by 100 for display."""
    header = f"{'metric':<10}{'mean':>8}"
    lines = [header, "-" * len(header)]
    for key in METRIC_KEYS:
        lines.append(f"{key:<10}{report.aggregates[key] * 100:>8.2f}")
    lines.append(f"{'examples':<10}{report.count:>8}")
    return "\n".join(lines)
