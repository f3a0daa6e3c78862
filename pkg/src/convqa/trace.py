"""Per-turn execution trace: which stages ran, backend calls, and fallbacks.

Event kinds:
  ``stage``         a pipeline stage executed
  ``backend_call``  one generation request, tagged with the model role
  ``ablated``       a stage was switched off by configuration
  ``flag``          a degradation the stage recovered from (fallbacks, parse misses)
  ``info``          extra observability detail

Timings are wall-clock and therefore excluded from the canonical
serialization (``include_timings=False``), which must be byte-stable across
identical runs.
"""
from __future__ import annotations

import time
from contextlib import contextmanager
from dataclasses import dataclass
from typing import Any, Iterator

STAGE = "stage"
BACKEND_CALL = "backend_call"
ABLATED = "ablated"
FLAG = "flag"
INFO = "info"


@dataclass
class StageEvent:
    stage: str
    kind: str
    role: str | None = None
    detail: str = ""
    duration_ms: float = 0.0

    def to_dict(self, include_timings: bool = True) -> dict[str, Any]:
        d: dict[str, Any] = {"stage": self.stage, "kind": self.kind}
        if self.role is not None:
            d["role"] = self.role
        if self.detail:
            d["detail"] = self.detail
        if include_timings:
            d["duration_ms"] = round(self.duration_ms, 3)
        return d


class Trace:
    """Ordered event log for one turn. Append order is execution order."""

    def __init__(self) -> None:
        self.events: list[StageEvent] = []

    def add(
        self,
        stage: str,
        kind: str,
        role: str | None = None,
        detail: str = "",
        duration_ms: float = 0.0,
    ) -> StageEvent:
        event = StageEvent(stage=stage, kind=kind, role=role, detail=detail, duration_ms=duration_ms)
        self.events.append(event)
        return event

    @contextmanager
    def stage(self, name: str, detail: str = "") -> Iterator[StageEvent]:
        event = self.add(name, STAGE, detail=detail)
        start = time.perf_counter()
        try:
            yield event
        finally:
            event.duration_ms = (time.perf_counter() - start) * 1000.0

    def ablated(self, stage: str, detail: str = "") -> None:
        self.add(stage, ABLATED, detail=detail or "stage disabled by configuration")

    def flag(self, stage: str, detail: str) -> None:
        self.add(stage, FLAG, detail=detail)

    def info(self, stage: str, detail: str) -> None:
        self.add(stage, INFO, detail=detail)

    def executed(self) -> list[tuple[str, str, str | None]]:
        """(stage, kind, role) for events that represent executed work; the
        ablation contract is checked against this view."""
        return [
            (e.stage, e.kind, e.role) for e in self.events if e.kind in (STAGE, BACKEND_CALL)
        ]

    def stages_seen(self, kind: str | None = None) -> list[str]:
        return [e.stage for e in self.events if kind is None or e.kind == kind]

    def to_list(self, include_timings: bool = True) -> list[dict[str, Any]]:
        return [e.to_dict(include_timings=include_timings) for e in self.events]
