"""Config file loading and component wiring.

A config file is one JSON object with these sections (all optional unless
noted):

  pipeline    max_documents, recall_top_k, rerank_top_n, ablations,
              tokenizer_mode, score_function
  connector   {"kind": "offline", "corpus_path": ...} or
              {"kind": "remote", "endpoint": ..., "headers": {...}, "timeout_s": ...}
  scorer      {"kind": "lexical"} or {"kind": "remote", "endpoint": ..., ...}
  embeddings  {"path": ...}  (required unless retrieval is ablated)
  backend     default backend for every role:
              {"kind": "http", "endpoint", "model", "headers", "timeout_s",
               "auth_header", "auth_env"} or
              {"kind": "scripted", "rules": [{"match", "response", "exact"?}]}
  backends    per-role overrides, e.g. {"responder": {...}}
  templates   prompt text overrides by template name
  template_names  stage -> template name indirection
  ui_dir      static chat UI directory served at /ui

Relative paths are resolved against the config file's directory. If
``auth_env`` names a set environment variable, its value is injected as the
``auth_header`` header (default "Authorization").
"""
from __future__ import annotations

import hashlib
import json
import os
from pathlib import Path
from typing import Any, Mapping

from .backend import (
    Backend,
    BackendRole,
    DEFAULT_TEMPLATES,
    HTTPBackend,
    PromptTemplate,
    ScriptedBackend,
    ScriptedRule,
)
from .errors import ConvQAError
from .pipeline import Pipeline, PipelineConfig
from .retriever import (
    EmbeddingModel,
    LexicalRerankScorer,
    OfflineCorpusConnector,
    RemoteRerankScorer,
    RemoteSearchConnector,
)

_STAGE_TEMPLATE_KEYS = (
    "reformulate",
    "extract_keywords",
    "respond_with_self_check",
    "respond_plain",
    "pairwise_judge",
)


def load_config(path: str | Path) -> dict[str, Any]:
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    if not isinstance(data, dict):
        raise ConvQAError("config must be a JSON object")
    data["_base_dir"] = str(path.parent)
    return data


def config_digest(config: Mapping[str, Any]) -> str:
    """Stable digest of the effective configuration (paths resolved, private
    keys excluded)."""
    public = {k: v for k, v in config.items() if not k.startswith("_")}
    canonical = json.dumps(public, sort_keys=True, ensure_ascii=False)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]


def _resolve(base_dir: Path, value: str) -> Path:
    path = Path(value)
    return path if path.is_absolute() else base_dir / path


def _build_backend(spec: Mapping[str, Any]) -> Backend:
    kind = spec.get("kind", "http")
    if kind == "scripted":
        rules = [
            ScriptedRule(
                matcher=rule["match"],
                response=rule["response"],
                exact=bool(rule.get("exact", False)),
            )
            for rule in spec.get("rules", [])
        ]
        return ScriptedBackend(rules)
    if kind == "http":
        headers = dict(spec.get("headers", {}))
        auth_env = spec.get("auth_env")
        if auth_env and os.environ.get(auth_env):
            headers[spec.get("auth_header", "Authorization")] = os.environ[auth_env]
        return HTTPBackend(
            endpoint=spec["endpoint"],
            model=spec.get("model", "default"),
            headers=headers,
            timeout_s=float(spec.get("timeout_s", 30.0)),
        )
    raise ConvQAError(f"unknown backend kind: {kind!r}")


def _build_templates(config: Mapping[str, Any]) -> dict[str, PromptTemplate]:
    templates = dict(DEFAULT_TEMPLATES)
    for name, text in config.get("templates", {}).items():
        base = templates.get(name)
        required = base.required_placeholders if base else frozenset()
        templates[name] = PromptTemplate(
            name=name, template_text=text, required_placeholders=required
        )
    resolved: dict[str, PromptTemplate] = {}
    names = config.get("template_names", {})
    for stage_key in _STAGE_TEMPLATE_KEYS:
        source = names.get(stage_key, stage_key)
        if source not in templates:
            raise ConvQAError(f"template {source!r} is not defined")
        resolved[stage_key] = templates[source]
    return resolved


def build_pipeline(config: Mapping[str, Any]) -> Pipeline:
    base_dir = Path(config.get("_base_dir", "."))
    pipe_cfg = config.get("pipeline", {})
    pipeline_config = PipelineConfig(
        max_documents=int(pipe_cfg.get("max_documents", 5)),
        recall_top_k=int(pipe_cfg.get("recall_top_k", 20)),
        rerank_top_n=int(pipe_cfg.get("rerank_top_n", 3)),
        ablations=frozenset(code.lower() for code in pipe_cfg.get("ablations", [])),
        tokenizer_mode=pipe_cfg.get("tokenizer_mode", "unicode"),
        score_function=pipe_cfg.get("score_function", "cosine"),
    )

    conn_cfg = config.get("connector", {})
    conn_kind = conn_cfg.get("kind", "offline")
    if conn_kind == "offline":
        if "corpus_path" not in conn_cfg:
            raise ConvQAError("offline connector needs 'corpus_path'")
        connector = OfflineCorpusConnector.from_file(
            _resolve(base_dir, conn_cfg["corpus_path"]),
            max_documents=pipeline_config.max_documents,
            tokenizer_mode=pipeline_config.tokenizer_mode,
        )
    elif conn_kind == "remote":
        connector = RemoteSearchConnector(
            endpoint=conn_cfg["endpoint"],
            max_documents=pipeline_config.max_documents,
            headers=conn_cfg.get("headers"),
            timeout_s=float(conn_cfg.get("timeout_s", 30.0)),
        )
    else:
        raise ConvQAError(f"unknown connector kind: {conn_kind!r}")

    scorer_cfg = config.get("scorer", {})
    scorer_kind = scorer_cfg.get("kind", "lexical")
    if scorer_kind == "lexical":
        scorer = LexicalRerankScorer(tokenizer_mode=pipeline_config.tokenizer_mode)
    elif scorer_kind == "remote":
        scorer = RemoteRerankScorer(
            endpoint=scorer_cfg["endpoint"],
            headers=scorer_cfg.get("headers"),
            timeout_s=float(scorer_cfg.get("timeout_s", 30.0)),
        )
    else:
        raise ConvQAError(f"unknown scorer kind: {scorer_kind!r}")

    emb_cfg = config.get("embeddings", {})
    if "path" in emb_cfg:
        embedding_model = EmbeddingModel.load(_resolve(base_dir, emb_cfg["path"]))
    elif "fr" in pipeline_config.ablations:
        embedding_model = EmbeddingModel({}, dimension=1)
    else:
        raise ConvQAError("config needs an 'embeddings.path' (or retrieval ablated)")

    backends: dict[BackendRole, Backend] = {}
    if "backend" in config:
        default_backend = _build_backend(config["backend"])
        backends = {role: default_backend for role in BackendRole}
    for role_name, spec in config.get("backends", {}).items():
        try:
            role = BackendRole(role_name)
        except ValueError:
            raise ConvQAError(f"unknown backend role: {role_name!r}") from None
        backends[role] = _build_backend(spec)
    if not backends:
        raise ConvQAError("config needs a 'backend' section (or per-role 'backends')")

    return Pipeline(
        config=pipeline_config,
        connector=connector,
        scorer=scorer,
        embedding_model=embedding_model,
        backends=backends,
        templates=_build_templates(config),
    )
