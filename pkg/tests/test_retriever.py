import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from convqa.errors import DatasetFormatError, RetrievalError
from convqa.retriever import (
    Document,
    EmbeddingModel,
    LexicalRerankScorer,
    OfflineCorpusConnector,
    cosine,
    embed,
    recall_score,
    recall_top,
    rerank,
    search_documents,
    segment_paragraphs,
)
from convqa.tokenization import tokenize
from convqa.trace import FLAG, Trace
from convqa.types import KeywordSet, Paragraph, RefinedQuestion, ScoredParagraph


def model_from(mapping, dim=3):
    return EmbeddingModel({k: np.array(v, dtype=float) for k, v in mapping.items()}, dim)


def rq(text="qword"):
    return RefinedQuestion(text=text, source_turn_index=1)


def para(text, doc="d", idx=0):
    return Paragraph(text=text, doc_id=doc, index_in_doc=idx)


# -- offline search ----------------------------------------------------------


def corpus_connector(docs, max_documents=5):
    return OfflineCorpusConnector(docs, max_documents=max_documents)


THREE_DOCS = [
    {"doc_id": "a", "title": "alpine cheese", "body": "made in mountain huts"},
    {"doc_id": "b", "title": "battle of hunayn", "body": "fought in a valley"},
    {"doc_id": "c", "title": "coffee species", "body": "arabica and robusta"},
]


def test_search_single_title_match():
    connector = corpus_connector(THREE_DOCS)
    docs = search_documents(KeywordSet(("hunayn",)), connector)
    assert [d.doc_id for d in docs] == ["b"]
    assert docs[0].rank == 1


def test_search_no_match_is_empty_not_error():
    connector = corpus_connector(THREE_DOCS)
    assert search_documents(KeywordSet(("zeppelin",)), connector) == []


def test_search_caps_at_max_documents_with_scan_oracle():
    docs = [
        {"doc_id": f"d{i}", "title": "shared topic", "body": f"unique{i} shared topic words {i}"}
        for i in range(5)
    ]
    connector = corpus_connector(docs, max_documents=3)
    query = KeywordSet(("shared", "topic", "unique3"))
    result = search_documents(query, connector)

    # oracle: full scan, overlap of distinct query tokens, tie-break doc_id
    q_tokens = {t.casefold() for t in tokenize("shared topic unique3")}
    scored = []
    for doc in docs:
        d_tokens = {t.casefold() for t in tokenize(doc["title"] + "\n" + doc["body"])}
        overlap = len(q_tokens & d_tokens)
        if overlap:
            scored.append((-overlap, doc["doc_id"]))
    expected = [doc_id for _, doc_id in sorted(scored)][:3]
    assert [d.doc_id for d in result] == expected
    assert [d.rank for d in result] == [1, 2, 3]


def test_search_query_joins_keywords_with_spaces():
    seen = {}

    class SpyConnector:
        max_documents = 5

        def search(self, query):
            seen["query"] = query
            return []

    search_documents(KeywordSet(("Battle of Hunayn", "date")), SpyConnector())
    assert seen["query"] == "Battle of Hunayn date"


def test_search_requires_keywords():
    with pytest.raises(ValueError):
        search_documents(KeywordSet(), corpus_connector(THREE_DOCS))


def test_corpus_file_rejects_duplicate_ids(tmp_path):
    path = tmp_path / "corpus.jsonl"
    doc = {"doc_id": "x", "body": "text"}
    path.write_text(json.dumps(doc) + "\n" + json.dumps(doc) + "\n")
    with pytest.raises(DatasetFormatError, match="duplicate"):
        OfflineCorpusConnector.from_file(path)


# -- segmentation ----------------------------------------------------------


def doc(body, doc_id="d1"):
    return Document(doc_id=doc_id, body=body, rank=1)


def test_segment_splits_on_blank_lines():
    paragraphs = segment_paragraphs(doc("a\n\nb"))
    assert [p.text for p in paragraphs] == ["a", "b"]
    assert [p.index_in_doc for p in paragraphs] == [0, 1]


def test_segment_empty_body():
    assert segment_paragraphs(doc("")) == []
    assert segment_paragraphs(doc("\n\n  \n\n")) == []


def test_segment_long_block_splits_at_sentences():
    # 300 sentences x 4 tokens = 1200 tokens, one block
    block = " ".join(f"one two three{i}." for i in range(300))
    paragraphs = segment_paragraphs(doc(block))
    assert len(paragraphs) >= 3
    token_counts = [len(tokenize(p.text)) for p in paragraphs]
    assert all(count <= 512 for count in token_counts)
    # concatenation preserves the token sequence
    merged = [t for p in paragraphs for t in tokenize(p.text)]
    assert merged == tokenize(block)


def test_segment_monster_sentence_cut_at_token_boundaries():
    block = " ".join(f"w{i}" for i in range(1200))  # no sentence punctuation
    paragraphs = segment_paragraphs(doc(block))
    assert len(paragraphs) == 3
    assert all(len(tokenize(p.text)) <= 512 for p in paragraphs)
    merged = [t for p in paragraphs for t in tokenize(p.text)]
    assert merged == tokenize(block)


def test_segment_cjk_sentences():
    body = "第一句。第二句！\n\n第三段落"
    texts = [p.text for p in segment_paragraphs(doc(body))]
    assert texts == ["第一句。第二句！", "第三段落"]


def test_segment_carries_source_url():
    document = Document(doc_id="d", body="text", rank=1, source_url="https://x.example")
    assert segment_paragraphs(document)[0].source_url == "https://x.example"


# -- embeddings ------------------------------------------------------------


def test_embed_single_known_token_is_exact():
    model = model_from({"solo": (3.0, -1.0, 2.0)})
    assert np.array_equal(embed("solo", model), np.array([3.0, -1.0, 2.0]))


def test_embed_is_arithmetic_mean():
    model = model_from({"a": (1.0, 0.0, 0.0), "b": (0.0, 1.0, 0.0)})
    assert np.allclose(embed("a b", model), [0.5, 0.5, 0.0])


def test_embed_ignores_oov_in_mean():
    model = model_from({"a": (1.0, 0.0, 0.0), "b": (0.0, 1.0, 0.0)})
    # hand mean over in-vocab tokens only: ((1,0,0) + (0,1,0)) / 2
    assert np.allclose(embed("a mystery b", model), [0.5, 0.5, 0.0])


def test_embed_all_oov_is_zero_vector():
    model = model_from({"a": (1.0, 0.0, 0.0)})
    assert np.array_equal(embed("nothing known", model), np.zeros(3))
    assert np.array_equal(embed("", model), np.zeros(3))


def test_lookup_unknown_token_zero_vector():
    model = model_from({"a": (1.0, 0.0, 0.0)})
    assert np.array_equal(model.lookup("zzz"), np.zeros(3))
    assert np.array_equal(model.lookup("A"), np.array([1.0, 0.0, 0.0]))  # case-folded


def test_vectors_file_with_header(tmp_path):
    path = tmp_path / "vec.txt"
    path.write_text("2 3\nalpha 1 0 0\nbeta 0 1 0\n")
    model = EmbeddingModel.load(path)
    assert model.dimension == 3
    assert np.array_equal(model.lookup("alpha"), [1, 0, 0])


def test_vectors_file_without_header(tmp_path):
    path = tmp_path / "vec.txt"
    path.write_text("alpha 1 0 0 0\n")
    assert EmbeddingModel.load(path).dimension == 4


def test_vectors_file_dimension_mismatch(tmp_path):
    path = tmp_path / "vec.txt"
    path.write_text("alpha 1 0 0\nbeta 1 0\n")
    with pytest.raises(DatasetFormatError, match="beta"):
        EmbeddingModel.load(path)


# -- recall scoring ----------------------------------------------------------


def test_recall_score_hand_cosine_example():
    model = model_from({"qword": (1.0, 0.0, 0.0), "kword": (0.0, 1.0, 0.0), "pword": (1.0, 1.0, 0.0)})
    score = recall_score(rq("qword"), KeywordSet(("kword",)), para("pword"), model)
    assert score == pytest.approx(math.sqrt(2), abs=1e-9)


def test_recall_score_identical_vectors_no_keywords():
    model = model_from({"qword": (0.3, 0.4, 0.0), "pword": (0.3, 0.4, 0.0)})
    score = recall_score(rq("qword"), KeywordSet(), para("pword"), model)
    assert score == pytest.approx(1.0, abs=1e-12)


def test_recall_score_zero_vector_convention():
    model = model_from({"qword": (1.0, 0.0, 0.0)})
    assert recall_score(rq("qword"), KeywordSet(), para("unknown words"), model) == 0.0


def test_recall_score_dot_option():
    model = model_from({"qword": (2.0, 0.0, 0.0), "pword": (3.0, 0.0, 0.0)})
    score = recall_score(rq("qword"), KeywordSet(), para("pword"), model, score_function="dot")
    assert score == pytest.approx(6.0)


@given(st.floats(min_value=1e-3, max_value=1e3))
def test_recall_score_scale_invariant(lam):
    base = {"qword": (0.5, -0.2, 0.1), "kword": (0.1, 0.9, -0.3), "pword": (0.4, 0.4, 0.2)}
    model = model_from(base)
    scaled = model_from({k: tuple(lam * x for x in v) for k, v in base.items()})
    keywords = KeywordSet(("kword",))
    s1 = recall_score(rq("qword"), keywords, para("pword"), model)
    s2 = recall_score(rq("qword"), keywords, para("pword"), scaled)
    assert abs(s1 - s2) < 1e-9


@given(st.permutations(["kword", "other", "third"]))
def test_recall_score_keyword_permutation_invariant(order):
    model = model_from(
        {
            "qword": (0.5, -0.2, 0.1),
            "kword": (0.1, 0.9, -0.3),
            "other": (0.7, 0.1, 0.2),
            "third": (-0.2, 0.3, 0.8),
            "pword": (0.4, 0.4, 0.2),
        }
    )
    baseline = recall_score(rq("qword"), KeywordSet(("kword", "other", "third")), para("pword"), model)
    shuffled = recall_score(rq("qword"), KeywordSet(tuple(order)), para("pword"), model)
    assert shuffled == baseline


# -- recall_top ------------------------------------------------------------


def test_recall_top_returns_all_when_fewer_than_k():
    model = model_from({"qword": (1.0, 0.0, 0.0), "x": (1.0, 0.0, 0.0), "y": (0.0, 1.0, 0.0)})
    result = recall_top(rq("qword"), KeywordSet(), [para("x", idx=0), para("y", idx=1)], model, k=5)
    assert len(result) == 2
    assert [sp.paragraph.text for sp in result] == ["x", "y"]
    assert result[0].recall_score >= result[1].recall_score


def test_recall_top_tie_break_by_source_order():
    model = model_from({"qword": (1.0, 0.0, 0.0), "same": (1.0, 0.0, 0.0)})
    paragraphs = [para("same", doc="d2", idx=3), para("same", doc="d5", idx=0)]
    result = recall_top(rq("qword"), KeywordSet(), paragraphs, model, k=2)
    assert [sp.source_order for sp in result] == [0, 1]


def _random_setup(seed, n_paragraphs):
    rnd = np.random.default_rng(seed)
    dim = int(rnd.integers(2, 17))
    vocab = {f"t{i}": rnd.normal(size=dim) for i in range(40)}
    vocab["qword"] = rnd.normal(size=dim)
    model = EmbeddingModel({k: v for k, v in vocab.items()}, dim)
    paragraphs = [
        para(" ".join(f"t{rnd.integers(0, 60)}" for _ in range(int(rnd.integers(1, 12)))), idx=i)
        for i in range(n_paragraphs)
    ]
    keywords = KeywordSet(tuple(f"t{i}" for i in range(int(rnd.integers(0, 4)))))
    return model, paragraphs, keywords


def test_recall_top_matches_brute_force_oracle():
    model, paragraphs, keywords = _random_setup(seed=7, n_paragraphs=50)
    result = recall_top(rq("qword"), keywords, paragraphs, model, k=10)

    # oracle: score each paragraph independently, sort by (-score, position)
    scored = [
        (recall_score(rq("qword"), keywords, p, model), i, p) for i, p in enumerate(paragraphs)
    ]
    expected = sorted(scored, key=lambda t: (-t[0], t[1]))[:10]
    assert [(sp.recall_score, sp.source_order) for sp in result] == [
        (s, i) for s, i, _ in expected
    ]


def test_recall_top_k_must_be_positive():
    model = model_from({"qword": (1.0, 0.0, 0.0)})
    with pytest.raises(ValueError):
        recall_top(rq(), KeywordSet(), [], model, k=0)


# -- rerank ------------------------------------------------------------------


def scored(text, order, recall=0.0, doc="d"):
    return ScoredParagraph(
        paragraph=para(text, doc=doc, idx=order), recall_score=recall, source_order=order
    )


def test_rerank_matches_exhaustive_rescore():
    scorer = LexicalRerankScorer()
    question = rq("which volcano is the largest on mars")
    candidates = [
        scored("olympus mons is the largest volcano on mars", 0),
        scored("alpine cheese is made in huts", 1),
        scored("the largest volcano on mars is olympus mons", 2),
        scored("mars has many volcanoes", 3),
        scored("the largest river is elsewhere", 4),
        scored("volcano eruptions on mars", 5),
        scored("largest volcano", 6),
        scored("totally unrelated text", 7),
    ]
    result = rerank(question, candidates, scorer, top_n=3)

    rescored = sorted(
        ((scorer.score(question.text, c.paragraph.text), c.source_order) for c in candidates),
        key=lambda t: (-t[0], t[1]),
    )[:3]
    assert [(sp.rerank_score, sp.source_order) for sp in result] == [(s, o) for s, o in rescored]
    assert [sp.final_rank for sp in result] == [1, 2, 3]


def test_rerank_top_n_larger_than_candidates():
    scorer = LexicalRerankScorer()
    candidates = [scored("a b c", 0), scored("a b", 1)]
    result = rerank(rq("a b c"), candidates, scorer, top_n=10)
    assert len(result) == 2
    assert all(sp.rerank_score is not None for sp in result)


def test_rerank_default_top_n_is_three():
    import inspect

    from convqa.retriever import DEFAULT_RERANK_TOP_N

    assert DEFAULT_RERANK_TOP_N == 3
    signature = inspect.signature(rerank)
    assert signature.parameters["top_n"].default == 3


def test_rerank_failure_falls_back_to_recall_order_with_flag():
    class BrokenScorer:
        def score(self, question, paragraph_text):
            raise RetrievalError("cross-scorer offline")

    candidates = [scored("first", 0, recall=0.9), scored("second", 1, recall=0.5)]
    trace = Trace()
    result = rerank(rq("q"), candidates, BrokenScorer(), top_n=1, trace=trace)
    assert [sp.paragraph.text for sp in result] == ["first"]
    assert result[0].rerank_score is None
    assert result[0].final_rank == 1
    assert any(e.kind == FLAG and "recall order" in e.detail for e in trace.events)


def test_rerank_output_is_subset_of_candidates():
    scorer = LexicalRerankScorer()
    candidates = [scored(f"text piece {i} overlap", i) for i in range(6)]
    result = rerank(rq("overlap piece"), candidates, scorer, top_n=3)
    candidate_keys = {(c.paragraph.doc_id, c.paragraph.index_in_doc) for c in candidates}
    assert all((sp.paragraph.doc_id, sp.paragraph.index_in_doc) in candidate_keys for sp in result)


def test_lexical_scorer_is_pure_and_bounded():
    scorer = LexicalRerankScorer()
    a = scorer.score("which coffee is sweeter", "arabica is sweeter than robusta")
    assert 0.0 <= a <= 1.0
    assert scorer.score("which coffee is sweeter", "arabica is sweeter than robusta") == a
    assert scorer.score("", "anything") == 0.0


def test_cosine_zero_convention():
    assert cosine(np.zeros(3), np.array([1.0, 0, 0])) == 0.0
    assert cosine(np.array([1.0, 0, 0]), np.zeros(3)) == 0.0


@settings(max_examples=25)
@given(st.integers(min_value=0, max_value=10_000))
def test_scale_invariance_preserves_recall_order(seed):
    model, paragraphs, keywords = _random_setup(seed=seed, n_paragraphs=12)
    lam = 7.5
    scaled = EmbeddingModel(
        {t: lam * model.lookup(t) for t in [f"t{i}" for i in range(40)] + ["qword"]},
        model.dimension,
    )
    base = recall_top(rq("qword"), keywords, paragraphs, model, k=5)
    scaled_result = recall_top(rq("qword"), keywords, paragraphs, scaled, k=5)
    assert [sp.source_order for sp in base] == [sp.source_order for sp in scaled_result]
