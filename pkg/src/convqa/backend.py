"""Uniform text-generation interface.

Every stage that needs a language model (question rewriting, keyword
extraction, answering, pairwise judging) goes through a ``Backend``. Two
implementations ship: an HTTP client speaking a minimal chat-completions
wire shape, so any hosted or local model can serve a role without code
changes, and a scripted backend that replays canned responses for tests and
offline demos.
"""
from __future__ import annotations

import re
import threading
import time
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Mapping, Protocol, runtime_checkable

import httpx

from .errors import BackendError, TemplateError, TransportError
from .trace import BACKEND_CALL, Trace


class BackendRole(str, Enum):
    REFINER = "refiner"
    KEYWORD_EXTRACTOR = "keyword_extractor"
    RESPONDER = "responder"
    JUDGE = "judge"


_PLACEHOLDER = re.compile(r"\{([A-Za-z_][A-Za-z0-9_]*)\}")


@dataclass(frozen=True)
class PromptTemplate:
    """Template text with ``{name}`` placeholders.

    Rendering is a single deterministic pass: placeholder-like text inside a
    bound value is substituted literally, never re-expanded.
    """

    name: str
    template_text: str
    required_placeholders: frozenset[str]

    def render(self, bindings: Mapping[str, str]) -> str:
        missing = self.required_placeholders - set(bindings)
        if missing:
            raise TemplateError(f"missing placeholder {sorted(missing)[0]}")

        def substitute(match: re.Match[str]) -> str:
            key = match.group(1)
            if key not in bindings:
                raise TemplateError(f"missing placeholder {key}")
            return bindings[key]

        return _PLACEHOLDER.sub(substitute, self.template_text)


@dataclass(frozen=True)
class GenerationRequest:
    role: BackendRole
    prompt: str
    max_output_tokens: int = 512
    temperature: float = 0.0

    def __post_init__(self):
        if not self.prompt:
            raise ValueError("prompt must be non-empty")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")


@runtime_checkable
class Backend(Protocol):
    def generate(self, request: GenerationRequest) -> str: ...


def _check_role(roles: frozenset[BackendRole] | None, request: GenerationRequest) -> None:
    if roles is not None and request.role not in roles:
        raise BackendError(
            f"backend not configured for role {request.role.value}", role=request.role.value
        )


@dataclass
class ScriptedRule:
    """Canned response: matches prompts by exact text or substring. The first
    registered rule that matches wins. ``consumed_count`` tracks uses."""

    matcher: str
    response: str
    exact: bool = False
    consumed_count: int = 0

    def matches(self, prompt: str) -> bool:
        return prompt == self.matcher if self.exact else self.matcher in prompt


class ScriptedBackend:
    """Deterministic backend driven by an ordered rule list.

    An unmatched prompt is an error carrying the prompt itself, so test
    scripts have to be exhaustive. Rule counters update atomically; the
    backend is safe to call from concurrent sessions.
    """

    def __init__(
        self,
        rules: Iterable[ScriptedRule] = (),
        roles: Iterable[BackendRole] | None = None,
    ) -> None:
        self.rules: list[ScriptedRule] = list(rules)
        self.roles = frozenset(roles) if roles is not None else None
        self._lock = threading.Lock()

    def add_rule(self, matcher: str, response: str, exact: bool = False) -> ScriptedRule:
        rule = ScriptedRule(matcher=matcher, response=response, exact=exact)
        self.rules.append(rule)
        return rule

    def generate(self, request: GenerationRequest) -> str:
        _check_role(self.roles, request)
        with self._lock:
            for rule in self.rules:
                if rule.matches(request.prompt):
                    rule.consumed_count += 1
                    return rule.response
        raise BackendError(
            f"no scripted rule matches prompt: {request.prompt!r}", role=request.role.value
        )


class HTTPBackend:
    """Chat-completions-style HTTP client.

    Sends ``{model, messages, temperature, max_tokens}`` to ``endpoint`` and
    reads ``choices[0].message.content`` back. Retries up to ``max_attempts``
    times with exponential backoff starting at ``backoff_s``, but only on
    transport failures and 5xx responses; other non-success statuses fail
    immediately and carry the status code.
    """

    def __init__(
        self,
        endpoint: str,
        model: str,
        headers: Mapping[str, str] | None = None,
        timeout_s: float = 30.0,
        roles: Iterable[BackendRole] | None = None,
        max_attempts: int = 3,
        backoff_s: float = 0.25,
    ) -> None:
        self.endpoint = endpoint
        self.model = model
        self.headers = dict(headers or {})
        self.roles = frozenset(roles) if roles is not None else None
        self.max_attempts = max_attempts
        self.backoff_s = backoff_s
        self._client = httpx.Client(timeout=timeout_s)

    def close(self) -> None:
        self._client.close()

    def generate(self, request: GenerationRequest) -> str:
        _check_role(self.roles, request)
        payload = {
            "model": self.model,
            "messages": [{"role": "user", "content": request.prompt}],
            "temperature": request.temperature,
            "max_tokens": request.max_output_tokens,
        }
        last_status: int | None = None
        last_error = "no attempt made"
        for attempt in range(self.max_attempts):
            if attempt:
                time.sleep(self.backoff_s * (2 ** (attempt - 1)))
            try:
                response = self._client.post(self.endpoint, json=payload, headers=self.headers)
            except httpx.HTTPError as exc:
                last_error = f"transport failure: {exc}"
                continue
            last_status = response.status_code
            if 500 <= response.status_code < 600:
                last_error = f"server error {response.status_code}"
                continue
            if response.status_code != 200:
                raise TransportError(
                    f"request failed with status {response.status_code}",
                    role=request.role.value,
                    status=response.status_code,
                )
            return self._extract_text(response, request)
        raise TransportError(
            f"giving up after {self.max_attempts} attempts: {last_error}",
            role=request.role.value,
            status=last_status,
        )

    @staticmethod
    def _extract_text(response: httpx.Response, request: GenerationRequest) -> str:
        try:
            body = response.json()
            return body["choices"][0]["message"]["content"]
        except (ValueError, LookupError, TypeError) as exc:
            raise BackendError(
                f"malformed completion response: {exc}", role=request.role.value
            ) from exc


def timed_generate(
    backend: Backend,
    request: GenerationRequest,
    trace: Trace | None = None,
    stage: str = "",
) -> str:
    """Run one generation and record it as a trace event with its role."""
    start = time.perf_counter()
    text = backend.generate(request)
    if trace is not None:
        trace.add(
            stage,
            BACKEND_CALL,
            role=request.role.value,
            duration_ms=(time.perf_counter() - start) * 1000.0,
        )
    return text


def _template(name: str, text: str, required: Iterable[str]) -> PromptTemplate:
    return PromptTemplate(name=name, template_text=text, required_placeholders=frozenset(required))


DEFAULT_TEMPLATES: dict[str, PromptTemplate] = {
    "reformulate": _template(
        "reformulate",
        (
            "You rewrite conversational questions so they can be understood on their own.\n"
            "Conversation so far:\n"
            "{context}\n"
            "Current question: {question}\n"
            "Rewrite the current question so it is self-contained. "
            "Reply with the rewritten question only.\n"
        ),
        ["context", "question"],
    ),
    "extract_keywords": _template(
        "extract_keywords",
        (
            "You extract search keywords from a question.\n"
            "Conversation so far:\n"
            "{context}\n"
            "Current question: {question}\n"
            "Self-contained form: {refined}\n"
            "List the key search terms, separated by semicolons.\n"
        ),
        ["context", "question", "refined"],
    ),
    "respond_with_self_check": _template(
        "respond_with_self_check",
        (
            "You answer questions, using the evidence paragraphs when they help.\n"
            "Conversation so far:\n"
            "{context}\n"
            "Question: {question}\n"
            "{paragraphs}\n"
            'If evidence paragraphs are given, first write one line per paragraph of the form '
            '"[k] helpful" or "[k] not helpful".\n'
            'Then write the final answer on a new line starting with "ANSWER:".\n'
        ),
        ["context", "question", "paragraphs"],
    ),
    "respond_plain": _template(
        "respond_plain",
        (
            "You answer questions, using the evidence paragraphs when they help.\n"
            "Conversation so far:\n"
            "{context}\n"
            "Question: {question}\n"
            "{paragraphs}\n"
            "Write the final answer.\n"
        ),
        ["context", "question", "paragraphs"],
    ),
    "pairwise_judge": _template(
        "pairwise_judge",
        (
            "You compare two answers to the same question and pick the better one.\n"
            "Conversation context:\n"
            "{context}\n"
            "Question: {question}\n"
            "Answer 1:\n"
            "{answer_1}\n"
            "Answer 2:\n"
            "{answer_2}\n"
            'Reply with exactly one word: "1" if Answer 1 is better, "2" if Answer 2 is better, '
            'or "tie".\n'
        ),
        ["context", "question", "answer_1", "answer_2"],
    ),
}
