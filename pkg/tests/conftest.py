"""Shared fixtures: the committed fixture files, scripted backend stacks
derived from dataset records, and pipeline factories."""
from __future__ import annotations

from pathlib import Path

import pytest

from convqa.backend import Backend, BackendRole, GenerationRequest, ScriptedBackend
from convqa.dataset import DatasetRecord, load_dataset
from convqa.pipeline import Pipeline, PipelineConfig
from convqa.retriever import EmbeddingModel, LexicalRerankScorer, OfflineCorpusConnector

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="session")
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture(scope="session")
def records_20() -> list[DatasetRecord]:
    return load_dataset(FIXTURES / "dataset_20.jsonl")


@pytest.fixture(scope="session")
def records_50() -> list[DatasetRecord]:
    return load_dataset(FIXTURES / "dataset_50.jsonl")


@pytest.fixture(scope="session")
def embedding_model() -> EmbeddingModel:
    return EmbeddingModel.load(FIXTURES / "vectors.txt")


@pytest.fixture()
def connector() -> OfflineCorpusConnector:
    return OfflineCorpusConnector.from_file(FIXTURES / "corpus.jsonl", max_documents=5)


def scripted_answer(record: DatasetRecord) -> str:
    """Mirror of the canned responder output used in config_scripted.json."""
    lines = []
    for k in range(1, 4):
        verdict = "helpful" if (record.turn_index + k) % 3 != 0 else "not helpful"
        lines.append(f"[{k}] {verdict}")
    return "\n".join(lines) + f"\nANSWER: {record.reference_response}"


def scripted_stack(records: list[DatasetRecord]) -> dict[BackendRole, ScriptedBackend]:
    """Per-role scripted backends whose rules cover every record's prompts.

    Matchers key on prompt lines that are unique per record: the current
    question line for the refiner and responder, the refined question line
    for the keyword extractor.
    """
    refiner = ScriptedBackend()
    keywords = ScriptedBackend()
    responder = ScriptedBackend()
    for record in records:
        refiner.add_rule(
            f"Current question: {record.question}\n", record.reformulated_question
        )
        keywords.add_rule(
            f"Self-contained form: {record.reformulated_question}\n",
            "; ".join(record.keywords),
        )
        responder.add_rule(f"Question: {record.question}\n", scripted_answer(record))
    return {
        BackendRole.REFINER: refiner,
        BackendRole.KEYWORD_EXTRACTOR: keywords,
        BackendRole.RESPONDER: responder,
    }


@pytest.fixture()
def pipeline_factory(connector, embedding_model, records_20):
    """Build a pipeline over the offline fixture stack with optional
    config overrides."""

    def build(ablations: frozenset[str] = frozenset(), **config_kwargs) -> Pipeline:
        config = PipelineConfig(ablations=frozenset(ablations), **config_kwargs)
        return Pipeline(
            config=config,
            connector=connector,
            scorer=LexicalRerankScorer(),
            embedding_model=embedding_model,
            backends=scripted_stack(records_20),
        )

    return build


class RecordingBackend:
    """Wraps a backend and keeps every prompt it saw, for prompt assertions."""

    def __init__(self, inner: Backend):
        self.inner = inner
        self.prompts: list[str] = []

    def generate(self, request: GenerationRequest) -> str:
        self.prompts.append(request.prompt)
        return self.inner.generate(request)
