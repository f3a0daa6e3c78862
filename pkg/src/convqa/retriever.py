"""Staged paragraph retrieval.

Three stages: a search connector returns whole documents for the keyword
query; documents are segmented into paragraphs; paragraphs are scored
cheaply against averaged word embeddings (recall), and the survivors are
rescored pairwise against the refined question (rerank) to pick the final
evidence set.

The recall score for a paragraph is the similarity between its embedding and
the refined question's embedding, plus the sum of similarities against each
keyword's embedding. Embeddings are the arithmetic mean of known token
vectors; anything fully out of vocabulary embeds to the zero vector, and
similarity against a zero vector is defined as 0.
"""
from __future__ import annotations

import json
import math
import re
import time
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Mapping, Protocol, runtime_checkable

import httpx
import numpy as np

from .errors import DatasetFormatError, RetrievalError
from .tokenization import ngrams, token_spans, tokenize
from .trace import Trace
from .types import KeywordSet, Paragraph, RefinedQuestion, ScoredParagraph

DEFAULT_MAX_DOCUMENTS = 5
DEFAULT_RECALL_TOP_K = 20
DEFAULT_RERANK_TOP_N = 3
MAX_PARAGRAPH_TOKENS = 512

SCORE_FUNCTIONS = ("cosine", "dot")


@dataclass(frozen=True)
class Document:
    """One search result. ``rank`` is the connector's 1-based position."""

    doc_id: str
    body: str
    title: str | None = None
    snippet: str | None = None
    rank: int = 1
    source_url: str | None = None


@runtime_checkable
class SearchConnector(Protocol):
    max_documents: int

    def search(self, query: str) -> list[Document]: ...


def load_corpus(path: str | Path) -> list[dict]:
    """Read an offline corpus file: one JSON document per line with doc_id,
    body, and optional title/snippet/source_url."""
    docs: list[dict] = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                data = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DatasetFormatError(f"not valid JSON ({exc.msg})", line_no) from exc
            if "doc_id" not in data or "body" not in data:
                raise DatasetFormatError("document needs 'doc_id' and 'body'", line_no)
            if data["doc_id"] in seen:
                raise DatasetFormatError(f"duplicate doc_id {data['doc_id']!r}", line_no)
            seen.add(data["doc_id"])
            docs.append(data)
    return docs


class OfflineCorpusConnector:
    """Deterministic stand-in for a web search engine.

    Documents are scored by the number of distinct query tokens found in
    title+body (case-folded), ties broken by doc_id; zero-overlap documents
    are never returned.
    """

    def __init__(
        self,
        documents: Iterable[dict],
        max_documents: int = DEFAULT_MAX_DOCUMENTS,
        tokenizer_mode: str = "unicode",
    ) -> None:
        self.max_documents = max_documents
        self.tokenizer_mode = tokenizer_mode
        self._docs: list[dict] = []
        for doc in documents:
            text = (doc.get("title") or "") + "\n" + doc["body"]
            tokens = {t.casefold() for t in tokenize(text, tokenizer_mode)}
            self._docs.append({**doc, "_tokens": tokens})

    @classmethod
    def from_file(
        cls,
        path: str | Path,
        max_documents: int = DEFAULT_MAX_DOCUMENTS,
        tokenizer_mode: str = "unicode",
    ) -> "OfflineCorpusConnector":
        return cls(load_corpus(path), max_documents=max_documents, tokenizer_mode=tokenizer_mode)

    def search(self, query: str) -> list[Document]:
        query_tokens = {t.casefold() for t in tokenize(query, self.tokenizer_mode)}
        scored = []
        for doc in self._docs:
            overlap = len(query_tokens & doc["_tokens"])
            if overlap > 0:
                scored.append((overlap, doc))
        scored.sort(key=lambda pair: (-pair[0], pair[1]["doc_id"]))
        return [
            Document(
                doc_id=doc["doc_id"],
                body=doc["body"],
                title=doc.get("title"),
                snippet=doc.get("snippet"),
                source_url=doc.get("source_url"),
                rank=i + 1,
            )
            for i, (_, doc) in enumerate(scored[: self.max_documents])
        ]


class RemoteSearchConnector:
    """Search over HTTP: POST {query, max_documents}, receive a JSON list of
    documents. Retries transport failures and 5xx like the HTTP backend."""

    def __init__(
        self,
        endpoint: str,
        max_documents: int = DEFAULT_MAX_DOCUMENTS,
        headers: Mapping[str, str] | None = None,
        timeout_s: float = 30.0,
        max_attempts: int = 3,
        backoff_s: float = 0.25,
    ) -> None:
        self.endpoint = endpoint
        self.max_documents = max_documents
        self.headers = dict(headers or {})
        self.max_attempts = max_attempts
        self.backoff_s = backoff_s
        self._client = httpx.Client(timeout=timeout_s)

    def search(self, query: str) -> list[Document]:
        payload = {"query": query, "max_documents": self.max_documents}
        last_error = "no attempt made"
        for attempt in range(self.max_attempts):
            if attempt:
                time.sleep(self.backoff_s * (2 ** (attempt - 1)))
            try:
                response = self._client.post(self.endpoint, json=payload, headers=self.headers)
            except httpx.HTTPError as exc:
                last_error = f"transport failure: {exc}"
                continue
            if 500 <= response.status_code < 600:
                last_error = f"server error {response.status_code}"
                continue
            if response.status_code != 200:
                raise RetrievalError(f"search failed with status {response.status_code}")
            results = response.json()
            return [
                Document(
                    doc_id=item["doc_id"],
                    body=item.get("body", ""),
                    title=item.get("title"),
                    snippet=item.get("snippet"),
                    source_url=item.get("source_url"),
                    rank=i + 1,
                )
                for i, item in enumerate(results[: self.max_documents])
            ]
        raise RetrievalError(f"search gave up after {self.max_attempts} attempts: {last_error}")


def search_documents(
    keywords: KeywordSet, connector: SearchConnector, trace: Trace | None = None
) -> list[Document]:
    """Issue the keyword query (terms joined by single spaces) and return the
    connector's documents in rank order. An empty result set is not an error."""
    if not keywords:
        raise ValueError("keywords must be non-empty; the refiner guarantees a fallback query")
    query = " ".join(keywords)
    documents = sorted(connector.search(query), key=lambda d: d.rank)
    documents = documents[: connector.max_documents]
    if trace is not None:
        trace.info("search", f"query={query!r} documents={len(documents)}")
    return documents


_SENTENCE_END = re.compile(r"[。！？!?.]+[\"'」』)]*\s*")
_BLANK_LINE = re.compile(r"\n\s*\n")


def _split_sentences(block: str) -> list[str]:
    """Partition a block at sentence-final punctuation; concatenating the
    pieces reproduces the block exactly."""
    sentences: list[str] = []
    start = 0
    for match in _SENTENCE_END.finditer(block):
        sentences.append(block[start : match.end()])
        start = match.end()
    if start < len(block):
        sentences.append(block[start:])
    return sentences


def _split_at_token_limit(text: str, max_tokens: int, mode: str) -> list[str]:
    """Cut text into pieces of at most ``max_tokens`` tokens, cutting only at
    token starts so no token is ever split."""
    spans = token_spans(text, mode)
    if len(spans) <= max_tokens:
        return [text]
    cuts = [spans[i][0] for i in range(max_tokens, len(spans), max_tokens)]
    pieces = []
    prev = 0
    for cut in cuts:
        pieces.append(text[prev:cut])
        prev = cut
    pieces.append(text[prev:])
    return pieces


def segment_paragraphs(
    document: Document,
    max_tokens: int = MAX_PARAGRAPH_TOKENS,
    tokenizer_mode: str = "unicode",
) -> list[Paragraph]:
    """Split a document body into paragraphs at blank lines.

    Oversized blocks are re-split at sentence boundaries, packing sentences
    greedily up to the token budget; a single sentence longer than the budget
    is cut at token boundaries. Paragraph indices are sequential from 0 and
    empty fragments are dropped.
    """
    paragraphs: list[Paragraph] = []

    def push(text: str) -> None:
        text = text.strip()
        if text:
            paragraphs.append(
                Paragraph(
                    text=text,
                    doc_id=document.doc_id,
                    index_in_doc=len(paragraphs),
                    source_url=document.source_url,
                )
            )

    for block in _BLANK_LINE.split(document.body):
        block = block.strip()
        if not block:
            continue
        if len(token_spans(block, tokenizer_mode)) <= max_tokens:
            push(block)
            continue
        pending = ""
        pending_tokens = 0
        for sentence in _split_sentences(block):
            n_tokens = len(token_spans(sentence, tokenizer_mode))
            if pending and pending_tokens + n_tokens > max_tokens:
                push(pending)
                pending, pending_tokens = "", 0
            if n_tokens > max_tokens:
                for piece in _split_at_token_limit(sentence, max_tokens, tokenizer_mode):
                    push(piece)
                continue
            pending += sentence
            pending_tokens += n_tokens
        if pending:
            push(pending)
    return paragraphs


class EmbeddingModel:
    """Word vectors loaded fully into memory.

    File format: optional "count dim" header, then one ``token v1 .. vd``
    line per word. Tokens are matched case-insensitively; unknown tokens look
    up to the zero vector.
    """

    def __init__(self, vectors: Mapping[str, np.ndarray], dimension: int) -> None:
        self.dimension = dimension
        self._vectors: dict[str, np.ndarray] = {}
        for token, vec in vectors.items():
            arr = np.asarray(vec, dtype=np.float64)
            if arr.shape != (dimension,):
                raise ValueError(f"vector for {token!r} has dimension {arr.shape}, want {dimension}")
            self._vectors[token.casefold()] = arr
        self._zero = np.zeros(dimension, dtype=np.float64)

    @classmethod
    def load(cls, path: str | Path) -> "EmbeddingModel":
        vectors: dict[str, np.ndarray] = {}
        dimension: int | None = None
        with open(path, encoding="utf-8") as fh:
            for line_no, line in enumerate(fh, start=1):
                parts = line.rstrip("\n").split(" ")
                if not line.strip():
                    continue
                if line_no == 1 and len(parts) == 2:
                    try:
                        int(parts[0]), int(parts[1])
                        dimension = int(parts[1])
                        continue
                    except ValueError:
                        pass
                token, values = parts[0], parts[1:]
                if dimension is None:
                    dimension = len(values)
                if len(values) != dimension:
                    raise DatasetFormatError(
                        f"vector for {token!r} has {len(values)} values, want {dimension}", line_no
                    )
                try:
                    vectors[token.casefold()] = np.array([float(v) for v in values])
                except ValueError as exc:
                    raise DatasetFormatError(f"bad vector value for {token!r}", line_no) from exc
        if dimension is None:
            raise DatasetFormatError("embedding file is empty")
        return cls(vectors, dimension)

    def lookup(self, token: str) -> np.ndarray:
        return self._vectors.get(token.casefold(), self._zero)

    def get(self, token: str) -> np.ndarray | None:
        return self._vectors.get(token.casefold())


def embed(text: str, model: EmbeddingModel, tokenizer_mode: str = "unicode") -> np.ndarray:
    """Mean of the vectors of in-vocabulary tokens; the zero vector when the
    text is empty or fully out of vocabulary."""
    found = [v for t in tokenize(text, tokenizer_mode) if (v := model.get(t)) is not None]
    if not found:
        return np.zeros(model.dimension, dtype=np.float64)
    return np.mean(found, axis=0)


def cosine(u: np.ndarray, v: np.ndarray) -> float:
    nu = float(np.linalg.norm(u))
    nv = float(np.linalg.norm(v))
    if nu == 0.0 or nv == 0.0:
        return 0.0
    return float(np.dot(u, v)) / (nu * nv)


def dot_score(u: np.ndarray, v: np.ndarray) -> float:
    return float(np.dot(u, v))


def _similarity(name: str):
    if name == "cosine":
        return cosine
    if name == "dot":
        return dot_score
    raise ValueError(f"unknown score function: {name!r}")


def _recall_scores(
    refined: RefinedQuestion,
    keywords: KeywordSet,
    paragraphs: list[Paragraph],
    model: EmbeddingModel,
    score_function: str,
    tokenizer_mode: str,
) -> list[float]:
    sim = _similarity(score_function)
    question_vec = embed(refined.text, model, tokenizer_mode)
    keyword_vecs = [embed(k, model, tokenizer_mode) for k in keywords]
    scores = []
    for paragraph in paragraphs:
        p_vec = embed(paragraph.text, model, tokenizer_mode)
        # fsum: exactly rounded, so the total is independent of keyword order
        scores.append(
            math.fsum([sim(question_vec, p_vec)] + [sim(k_vec, p_vec) for k_vec in keyword_vecs])
        )
    return scores


def recall_score(
    refined: RefinedQuestion,
    keywords: KeywordSet,
    paragraph: Paragraph,
    model: EmbeddingModel,
    score_function: str = "cosine",
    tokenizer_mode: str = "unicode",
) -> float:
    """Question-paragraph similarity plus the sum of keyword-paragraph
    similarities, on averaged word embeddings."""
    return _recall_scores(refined, keywords, [paragraph], model, score_function, tokenizer_mode)[0]


def recall_top(
    refined: RefinedQuestion,
    keywords: KeywordSet,
    paragraphs: list[Paragraph],
    model: EmbeddingModel,
    k: int = DEFAULT_RECALL_TOP_K,
    score_function: str = "cosine",
    tokenizer_mode: str = "unicode",
) -> list[ScoredParagraph]:
    """The ``k`` highest-scoring paragraphs, descending.

    ``paragraphs`` must arrive in document-rank-major order (as produced by
    segmenting ranked documents); ties are broken by that position, keeping
    earlier documents and earlier paragraphs first.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    scores = _recall_scores(refined, keywords, paragraphs, model, score_function, tokenizer_mode)
    ranked = sorted(
        (
            ScoredParagraph(paragraph=p, recall_score=s, source_order=i)
            for i, (p, s) in enumerate(zip(paragraphs, scores))
        ),
        key=lambda sp: (-sp.recall_score, sp.source_order),
    )
    return ranked[:k]


@runtime_checkable
class RerankScorer(Protocol):
    def score(self, question: str, paragraph_text: str) -> float: ...


class LexicalRerankScorer:
    """Pure, deterministic cross-scorer: Dice overlap between the token
    bigram sets of question and paragraph (unigrams when either side is too
    short for bigrams)."""

    def __init__(self, tokenizer_mode: str = "unicode") -> None:
        self.tokenizer_mode = tokenizer_mode

    def score(self, question: str, paragraph_text: str) -> float:
        q_tokens = tokenize(question, self.tokenizer_mode)
        p_tokens = tokenize(paragraph_text, self.tokenizer_mode)
        q_grams = set(ngrams(q_tokens, 2))
        p_grams = set(ngrams(p_tokens, 2))
        if not q_grams or not p_grams:
            q_grams, p_grams = set(q_tokens), set(p_tokens)
        if not q_grams or not p_grams:
            return 0.0
        return 2.0 * len(q_grams & p_grams) / (len(q_grams) + len(p_grams))


class RemoteRerankScorer:
    """Cross-scorer over HTTP: POST {question, paragraph}, receive {score}."""

    def __init__(
        self,
        endpoint: str,
        headers: Mapping[str, str] | None = None,
        timeout_s: float = 30.0,
        max_attempts: int = 3,
        backoff_s: float = 0.25,
    ) -> None:
        self.endpoint = endpoint
        self.headers = dict(headers or {})
        self.max_attempts = max_attempts
        self.backoff_s = backoff_s
        self._client = httpx.Client(timeout=timeout_s)

    def score(self, question: str, paragraph_text: str) -> float:
        payload = {"question": question, "paragraph": paragraph_text}
        last_error = "no attempt made"
        for attempt in range(self.max_attempts):
            if attempt:
                time.sleep(self.backoff_s * (2 ** (attempt - 1)))
            try:
                response = self._client.post(self.endpoint, json=payload, headers=self.headers)
            except httpx.HTTPError as exc:
                last_error = f"transport failure: {exc}"
                continue
            if 500 <= response.status_code < 600:
                last_error = f"server error {response.status_code}"
                continue
            if response.status_code != 200:
                raise RetrievalError(f"rerank failed with status {response.status_code}")
            value = float(response.json()["score"])
            if not math.isfinite(value):
                raise RetrievalError("rerank score is not finite")
            return value
        raise RetrievalError(f"rerank gave up after {self.max_attempts} attempts: {last_error}")


def rerank(
    refined: RefinedQuestion,
    candidates: list[ScoredParagraph],
    scorer: RerankScorer,
    top_n: int = DEFAULT_RERANK_TOP_N,
    trace: Trace | None = None,
) -> list[ScoredParagraph]:
    """Rescore candidates pairwise against the refined question and keep the
    best ``top_n``, assigning final ranks 1..n.

    Ties break like recall: earlier documents and earlier paragraphs first.
    If the scorer fails (remote scorer down), the recall ordering is kept for
    this turn and the fallback is flagged in the trace.
    """
    if top_n < 1:
        raise ValueError("top_n must be >= 1")
    try:
        rescored = [
            replace(c, rerank_score=scorer.score(refined.text, c.paragraph.text))
            for c in candidates
        ]
    except RetrievalError as exc:
        if trace is not None:
            trace.flag("rerank", f"rerank scorer failed; keeping recall order ({exc})")
        selected = candidates[:top_n]
        return [replace(c, final_rank=i + 1) for i, c in enumerate(selected)]
    rescored.sort(key=lambda sp: (-(sp.rerank_score or 0.0), sp.source_order))
    return [replace(c, final_rank=i + 1) for i, c in enumerate(rescored[:top_n])]
