"""Pairwise preference judging and ablation reporting.

The judge backend sees both answers and names a winner. Answer positions are
randomized per trial to control for position bias (the tally is mapped back
to the original identities); an output that names neither answer counts as a
tie and is tallied as unparsed.
"""
from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Any, Mapping

from .backend import (
    Backend,
    BackendRole,
    DEFAULT_TEMPLATES,
    GenerationRequest,
    PromptTemplate,
)
from .metrics import METRIC_KEYS, MetricReport

ABLATION_ROW_ORDER = ("full", "-QF", "-FR", "-SC", "-ALL")


@dataclass(frozen=True)
class JudgeTally:
    a_wins: int = 0
    b_wins: int = 0
    ties: int = 0
    unparsed: int = 0

    @property
    def trials(self) -> int:
        return self.a_wins + self.b_wins + self.ties

    def to_dict(self) -> dict[str, int]:
        return {
            "a_wins": self.a_wins,
            "b_wins": self.b_wins,
            "ties": self.ties,
            "unparsed": self.unparsed,
        }


def _parse_verdict(raw: str) -> str | None:
    """Map judge output to 'first', 'second', or 'tie'; None if unparseable."""
    text = raw.strip().casefold()
    if not text:
        return None
    if text.startswith("tie") or text == "draw":
        return "tie"
    for prefix in ("answer 1", "answer a", "1", "a"):
        if text == prefix or text.startswith(prefix + " ") or text.startswith(prefix + "."):
            return "first"
    for prefix in ("answer 2", "answer b", "2", "b"):
        if text == prefix or text.startswith(prefix + " ") or text.startswith(prefix + "."):
            return "second"
    return None


def pairwise_judge(
    context: str,
    question: str,
    answer_a: str,
    answer_b: str,
    judge_backend: Backend,
    trials: int = 1,
    seed: int = 0,
    randomize_positions: bool = True,
    template: PromptTemplate | None = None,
) -> JudgeTally:
    """Run ``trials`` judge calls and tally wins for the original answers.

    With ``randomize_positions`` the sides are swapped on a seeded coin flip
    each trial; disable it for fully scripted judges keyed to position.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    template = template or DEFAULT_TEMPLATES["pairwise_judge"]
    rng = random.Random(seed)
    a_wins = b_wins = ties = unparsed = 0
    for _ in range(trials):
        swapped = randomize_positions and rng.random() < 0.5
        first, second = (answer_b, answer_a) if swapped else (answer_a, answer_b)
        prompt = template.render(
            {"context": context, "question": question, "answer_1": first, "answer_2": second}
        )
        raw = judge_backend.generate(GenerationRequest(role=BackendRole.JUDGE, prompt=prompt))
        verdict = _parse_verdict(raw)
        if verdict is None:
            ties += 1
            unparsed += 1
        elif verdict == "tie":
            ties += 1
        elif (verdict == "first") != swapped:
            a_wins += 1
        else:
            b_wins += 1
    return JudgeTally(a_wins=a_wins, b_wins=b_wins, ties=ties, unparsed=unparsed)


def render_judge_tally(name_a: str, name_b: str, tally: JudgeTally) -> str:
    width = max(len(name_a), len(name_b), len("model"))
    lines = [
        f"{'model':<{width}}  wins",
        f"{name_a:<{width}}  {tally.a_wins}",
        f"{name_b:<{width}}  {tally.b_wins}",
    ]
    if tally.ties:
        lines.append(f"{'(ties)':<{width}}  {tally.ties}")
    return "\n".join(lines)


def ablation_label(dropped: set[str] | frozenset[str]) -> str:
    """Canonical row label for a set of dropped stage codes."""
    if not dropped:
        return "full"
    if set(dropped) == {"qf", "fr", "sc"}:
        return "-ALL"
    order = {"qf": "QF", "fr": "FR", "sc": "SC"}
    return "-" + "/".join(order[code] for code in ("qf", "fr", "sc") if code in dropped)


def ablation_report(runs: Mapping[str, MetricReport]) -> tuple[str, list[dict[str, Any]]]:
    """Render one metrics row per configuration.

    Rows follow the canonical order (full run first, then single-stage drops,
    then the full drop); unknown labels sort after, alphabetically. Returns
    the aligned-column text and the machine-readable rows. Values are scaled
    by 100 for display but stored raw.
    """
    if not runs:
        raise ValueError("no runs to report")
    known = [label for label in ABLATION_ROW_ORDER if label in runs]
    extra = sorted(set(runs) - set(ABLATION_ROW_ORDER))
    labels = known + extra

    label_width = max(len(label) for label in labels + ["config"])
    header = f"{'config':<{label_width}}" + "".join(f"{key:>9}" for key in METRIC_KEYS)
    lines = [header, "-" * len(header)]
    rows: list[dict[str, Any]] = []
    for label in labels:
        report = runs[label]
        lines.append(
            f"{label:<{label_width}}"
            + "".join(f"{report.aggregates[key] * 100:>9.2f}" for key in METRIC_KEYS)
        )
        rows.append({"config": label, **{key: report.aggregates[key] for key in METRIC_KEYS}})
    return "\n".join(lines), rows
