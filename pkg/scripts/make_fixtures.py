#!/usr/bin/env python3
"""Regenerate the committed test fixtures under tests/fixtures/.

Everything here is deterministic: embedding vectors are seeded per token, so
adding vocabulary never changes existing vectors. Run from the repo root:

    python3 scripts/make_fixtures.py
"""
from __future__ import annotations

import json
import random
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / "src"))

from convqa.tokenization import tokenize  # noqa: E402

FIXTURES = ROOT / "tests" / "fixtures"

# --- topics ---------------------------------------------------------------
# Five conversations, four turns each -> the 20-record pipeline fixture.
# Each topic owns a few corpus documents sharing its vocabulary.

CONVERSATIONS = [
    {
        "conv_id": "conv-battle",
        "turns": [
            {
                "q": "Who fought in the Battle of Hunayn?",
                "refined": "Who fought in the Battle of Hunayn?",
                "keywords": ["Battle of Hunayn", "belligerents"],
                "answer": "The battle was fought between Muhammad's followers and the Hawazin tribe.",
            },
            {
                "q": "When did the battle happen?",
                "refined": "When did the Battle of Hunayn happen?",
                "keywords": ["Battle of Hunayn", "date"],
                "answer": "It took place in 630 CE, shortly after the conquest of Mecca.",
            },
            {
                "q": "Where was it fought?",
                "refined": "Where was the Battle of Hunayn fought?",
                "keywords": ["Battle of Hunayn", "location", "valley"],
                "answer": "It was fought in a valley on the road from Mecca to Taif.",
            },
            {
                "q": "What happened afterwards?",
                "refined": "What happened after the Battle of Hunayn?",
                "keywords": ["Battle of Hunayn", "aftermath", "siege"],
                "answer": "The victors pursued the enemy and laid siege to Taif soon afterwards.",
            },
        ],
    },
    {
        "conv_id": "conv-redcliffs",
        "turns": [
            {
                "q": "赤壁之战发生在哪一年？",
                "refined": "赤壁之战发生在哪一年？",
                "keywords": ["赤壁之战", "年份"],
                "answer": "赤壁之战发生在公元208年冬天。",
            },
            {
                "q": "交战双方是谁？",
                "refined": "赤壁之战的交战双方是谁？",
                "keywords": ["赤壁之战", "交战双方"],
                "answer": "交战双方是曹操的北方军队与孙权和刘备的联军。",
            },
            {
                "q": "联军用了什么战术？",
                "refined": "赤壁之战中孙刘联军用了什么战术？",
                "keywords": ["赤壁之战", "火攻", "战术"],
                "answer": "联军借东南风发动火攻，烧毁了曹操的战船。",
            },
            {
                "q": "这场战役的影响是什么？",
                "refined": "赤壁之战的历史影响是什么？",
                "keywords": ["赤壁之战", "影响", "三国"],
                "answer": "这场战役奠定了魏蜀吴三国鼎立的格局。",
            },
        ],
    },
    {
        "conv_id": "conv-mars",
        "turns": [
            {
                "q": "What is the largest volcano on Mars?",
                "refined": "What is the largest volcano on Mars?",
                "keywords": ["Mars", "largest volcano"],
                "answer": "Olympus Mons is the largest volcano on Mars.",
            },
            {
                "q": "How tall is it?",
                "refined": "How tall is Olympus Mons on Mars?",
                "keywords": ["Olympus Mons", "height"],
                "answer": "Olympus Mons rises nearly 22 kilometers above the surrounding plains.",
            },
            {
                "q": "Which rover landed there in 2021?",
                "refined": "Which rover landed on Mars in 2021?",
                "keywords": ["Mars rover", "2021", "landing"],
                "answer": "The Perseverance rover landed in Jezero crater in February 2021.",
            },
            {
                "q": "What is that rover searching for?",
                "refined": "What is the Perseverance rover searching for on Mars?",
                "keywords": ["Perseverance", "mission", "ancient life"],
                "answer": "Perseverance collects rock samples to look for signs of ancient microbial life.",
            },
        ],
    },
    {
        "conv_id": "conv-yangtze",
        "turns": [
            {
                "q": "长江有多长？",
                "refined": "长江的全长是多少？",
                "keywords": ["长江", "全长"],
                "answer": "长江全长约6300公里，是亚洲最长的河流。",
            },
            {
                "q": "它发源于哪里？",
                "refined": "长江发源于哪里？",
                "keywords": ["长江", "源头", "高原"],
                "answer": "长江发源于青藏高原的唐古拉山脉。",
            },
            {
                "q": "流经哪些大城市？",
                "refined": "长江流经哪些大城市？",
                "keywords": ["长江", "沿岸城市"],
                "answer": "长江流经重庆、武汉、南京和上海等大城市。",
            },
            {
                "q": "上面最大的水坝是什么？",
                "refined": "长江上最大的水坝是什么？",
                "keywords": ["长江", "三峡", "水坝"],
                "answer": "三峡大坝是长江上最大的水利工程。",
            },
        ],
    },
    {
        "conv_id": "conv-coffee",
        "turns": [
            {
                "q": "Where was coffee first cultivated?",
                "refined": "Where was coffee first cultivated?",
                "keywords": ["coffee", "first cultivated", "origin"],
                "answer": "Coffee was first cultivated in Yemen after spreading from Ethiopia.",
            },
            {
                "q": "How did it reach Europe?",
                "refined": "How did coffee reach Europe?",
                "keywords": ["coffee", "Europe", "trade"],
                "answer": "Venetian traders brought coffee to Europe in the early 17th century.",
            },
            {
                "q": "What are the two main species?",
                "refined": "What are the two main species of coffee?",
                "keywords": ["coffee species", "arabica", "robusta"],
                "answer": "The two main species are arabica and robusta.",
            },
            {
                "q": "Which one tastes sweeter?",
                "refined": "Which coffee species tastes sweeter, arabica or robusta?",
                "keywords": ["arabica", "robusta", "taste"],
                "answer": "Arabica is generally sweeter and softer than robusta.",
            },
        ],
    },
]

CORPUS = [
    {
        "doc_id": "battle-overview",
        "title": "Battle of Hunayn overview",
        "source_url": "https://example.org/hunayn",
        "body": (
            "The Battle of Hunayn was fought between Muhammad and his followers against "
            "the Hawazin tribe and its Thaqif allies. The belligerents met shortly after "
            "the conquest of Mecca.\n\n"
            "The battle happened in 630 CE. Early chroniclers place the date in the eighth "
            "year of the Islamic calendar.\n\n"
            "The fighting took place in a valley on one of the roads leading from Mecca to "
            "Taif, where the Hawazin had prepared an ambush."
        ),
        "snippet": "The Battle of Hunayn was fought in 630 CE between Muhammad's followers and the Hawazin tribe.",
    },
    {
        "doc_id": "battle-aftermath",
        "title": "Aftermath of Hunayn",
        "source_url": "https://example.org/hunayn-aftermath",
        "body": (
            "After the Battle of Hunayn the victors pursued the retreating enemy toward "
            "Autas and later laid siege to the walled city of Taif.\n\n"
            "The siege of Taif ended without an immediate surrender, but the city "
            "capitulated within a year. Spoils from the battle were distributed at Jirana."
        ),
        "snippet": "After Hunayn the victors pursued the enemy and laid siege to Taif.",
    },
    {
        "doc_id": "redcliffs-main",
        "title": "赤壁之战",
        "source_url": "https://example.org/redcliffs",
        "body": (
            "赤壁之战发生在公元208年冬天，是中国历史上著名的以少胜多的战役。\n\n"
            "交战双方是曹操率领的北方军队与孙权、刘备组成的联军。曹操号称八十万大军南下。\n\n"
            "孙刘联军利用东南风发动火攻，战术大获成功，烧毁了曹操连接在一起的战船。\n\n"
            "这场战役的影响深远，奠定了魏、蜀、吴三国鼎立格局的基础。"
        ),
        "snippet": "赤壁之战发生在公元208年，孙刘联军以火攻大败曹操。",
    },
    {
        "doc_id": "redcliffs-tactics",
        "title": "赤壁之战的火攻战术",
        "body": (
            "火攻是赤壁之战中联军的核心战术。黄盖诈降，驾驶装满易燃物的船只冲向曹军水寨。\n\n"
            "当夜东南风大作，火势迅速蔓延，曹操的战船相连无法散开，损失惨重。"
        ),
        "snippet": "黄盖诈降驾火船冲向曹军水寨，东南风助火势蔓延。",
    },
    {
        "doc_id": "mars-volcano",
        "title": "Olympus Mons",
        "source_url": "https://example.org/olympus-mons",
        "body": (
            "Olympus Mons is the largest volcano on Mars and the tallest known volcano in "
            "the solar system.\n\n"
            "The shield volcano rises nearly 22 kilometers above the surrounding plains, "
            "about two and a half times the height of Mount Everest.\n\n"
            "Its caldera complex is roughly 80 kilometers across."
        ),
        "snippet": "Olympus Mons, the largest volcano on Mars, rises nearly 22 kilometers.",
    },
    {
        "doc_id": "mars-rover",
        "title": "Perseverance rover",
        "source_url": "https://example.org/perseverance",
        "body": (
            "The Perseverance rover landed on Mars in February 2021 inside Jezero crater, "
            "the site of an ancient river delta.\n\n"
            "The mission of Perseverance is to search for signs of ancient microbial life. "
            "The rover collects rock samples and caches them for a future return mission.\n\n"
            "Perseverance also carried the Ingenuity helicopter, the first aircraft to fly "
            "on another planet."
        ),
        "snippet": "Perseverance landed in Jezero crater in 2021 to search for ancient life.",
    },
    {
        "doc_id": "yangtze-main",
        "title": "长江",
        "source_url": "https://example.org/yangtze",
        "body": (
            "长江全长约6300公里，是亚洲最长、世界第三长的河流。\n\n"
            "长江发源于青藏高原的唐古拉山脉，源头河段称沱沱河。\n\n"
            "长江自西向东流经重庆、武汉、南京等大城市，最后在上海注入东海。"
        ),
        "snippet": "长江全长约6300公里，发源于青藏高原，注入东海。",
    },
    {
        "doc_id": "yangtze-dam",
        "title": "三峡大坝",
        "body": (
            "三峡大坝是长江上最大的水坝，也是世界上规模最大的水利工程之一。\n\n"
            "大坝位于湖北省宜昌市三斗坪，2006年全线建成。水电站总装机容量约2250万千瓦。"
        ),
        "snippet": "三峡大坝是长江上最大的水利工程，位于湖北宜昌。",
    },
    {
        "doc_id": "coffee-history",
        "title": "History of coffee",
        "source_url": "https://example.org/coffee-history",
        "body": (
            "Coffee originated in Ethiopia, but it was first cultivated systematically in "
            "Yemen, where Sufi monasteries brewed it during night devotions.\n\n"
            "Venetian traders brought coffee to Europe in the early 17th century, and "
            "coffee houses spread quickly across the continent.\n\n"
            "By the 18th century coffee plantations had been established in the Americas."
        ),
        "snippet": "Coffee was first cultivated in Yemen; Venetian traders brought it to Europe.",
    },
    {
        "doc_id": "coffee-species",
        "title": "Coffee species",
        "body": (
            "The two main cultivated coffee species are arabica and robusta.\n\n"
            "Arabica is generally sweeter and softer in taste, with higher acidity. "
            "Robusta carries more caffeine and a harsher, more bitter taste.\n\n"
            "Arabica accounts for roughly 60 percent of world production."
        ),
        "snippet": "Arabica is sweeter and softer; robusta is stronger and more bitter.",
    },
    {
        "doc_id": "unrelated-cheese",
        "title": "Alpine cheese making",
        "body": (
            "Alpine cheese is made in mountain huts during the summer grazing season.\n\n"
            "Raw milk is heated in copper vats and curdled with rennet."
        ),
        "snippet": "Alpine cheese is made in mountain huts from raw milk.",
    },
]


def build_record(conv_id, turns, turn_idx, paragraphs):
    """Assemble a record for turn turn_idx (0-based) of one conversation."""
    turn = turns[turn_idx]
    return {
        "conv_id": conv_id,
        "turn_index": turn_idx + 1,
        "context": [
            {"question": turns[i]["q"], "response": turns[i]["answer"]} for i in range(turn_idx)
        ],
        "question": turn["q"],
        "reformulated_question": turn["refined"],
        "keywords": turn["keywords"],
        "paragraphs": paragraphs,
        "reference_response": turn["answer"],
    }


def labeled_paragraphs(conv_index: int, turn_index: int):
    """2-3 labeled paragraphs per record, with deterministic mixed labels."""
    count = 2 + (conv_index + turn_index) % 2
    paragraphs = []
    for i in range(count):
        helpful = (conv_index + turn_index + i) % 3 != 2
        votes = 3 if (i + turn_index) % 2 == 0 else 2
        if not helpful:
            votes = 1 if (i + turn_index) % 2 == 0 else 0
        paragraphs.append(
            {
                "text": f"Background paragraph {i + 1} for this question, kept short on purpose.",
                "helpful": helpful,
                "votes": votes,
                **({"source_url": f"https://example.org/p{conv_index}-{turn_index}-{i}"} if i == 0 else {}),
            }
        )
    return paragraphs


def make_dataset_20():
    records = []
    for ci, conv in enumerate(CONVERSATIONS):
        for ti in range(len(conv["turns"])):
            records.append(
                build_record(conv["conv_id"], conv["turns"], ti, labeled_paragraphs(ci, ti))
            )
    return records


def make_dataset_50():
    """Ten synthetic conversations with varying lengths: 3,4,5,6,7 twice."""
    lengths = [3, 4, 5, 6, 7] * 2
    records = []
    for ci, length in enumerate(lengths):
        conv_id = f"synth-{ci:02d}"
        turns = []
        for ti in range(length):
            if ci % 2 == 0:
                q = f"问题{ci}号第{ti + 1}轮，请介绍主题{ci}的方面{ti + 1}。"
                a = f"这是主题{ci}方面{ti + 1}的回答，包含一些细节与说明。"
                refined = f"主题{ci}的方面{ti + 1}具体是什么？"
            else:
                q = f"Topic {ci} turn {ti + 1}: what about aspect {ti + 1}?"
                a = f"Aspect {ti + 1} of topic {ci} works like this, with a few details."
                refined = f"What is aspect {ti + 1} of topic {ci}?"
            turns.append({"q": q, "answer": a, "refined": refined, "keywords": []})
        for ti in range(length):
            n_keywords = 1 + (ci + ti) % 4
            turns[ti]["keywords"] = [f"topic{ci}-term{k}" for k in range(n_keywords)]
            n_paragraphs = 1 + (ci * 3 + ti) % 4
            paragraphs = []
            for p in range(n_paragraphs):
                helpful = (ci + ti + p) % 4 != 3
                paragraphs.append(
                    {
                        "text": f"Synthetic evidence {p + 1} for topic {ci} turn {ti + 1}.",
                        "helpful": helpful,
                        "votes": 2 + (p % 2) if helpful else p % 2,
                    }
                )
            records.append(build_record(conv_id, turns, ti, paragraphs))
    return records


def token_vector(token: str, dim: int = 16):
    rng = random.Random(f"vec:{token}")
    return [round(rng.uniform(-1.0, 1.0), 6) for _ in range(dim)]


def make_vectors(paths_texts, dim=16):
    """Vectors for every non-punctuation token seen in the fixture texts."""
    vocab = set()
    for text in paths_texts:
        for token in tokenize(text):
            if any(ch.isalnum() for ch in token):
                vocab.add(token.casefold())
    entries = sorted(vocab)
    lines = [f"{len(entries)} {dim}"]
    for token in entries:
        values = " ".join(str(v) for v in token_vector(token, dim))
        lines.append(f"{token} {values}")
    return "\n".join(lines) + "\n"


def scripted_rules(records):
    """Scripted backend rules covering every record, keyed to prompt lines."""
    refiner, keywords, responder = [], [], []
    for rec in records:
        refiner.append(
            {"match": f"Current question: {rec['question']}\n", "response": rec["reformulated_question"]}
        )
        keywords.append(
            {
                "match": f"Self-contained form: {rec['reformulated_question']}\n",
                "response": "; ".join(rec["keywords"]),
            }
        )
        verdict_lines = []
        for k in range(1, 4):
            verdict = "helpful" if (rec["turn_index"] + k) % 3 != 0 else "not helpful"
            verdict_lines.append(f"[{k}] {verdict}")
        responder.append(
            {
                "match": f"Question: {rec['question']}\n",
                "response": "\n".join(verdict_lines) + f"\nANSWER: {rec['reference_response']}",
            }
        )
    return refiner, keywords, responder


def main():
    FIXTURES.mkdir(parents=True, exist_ok=True)

    dataset_20 = make_dataset_20()
    dataset_50 = make_dataset_50()
    demo = dataset_20[:3]

    def write_jsonl(name, items):
        path = FIXTURES / name
        with open(path, "w", encoding="utf-8") as fh:
            for item in items:
                fh.write(json.dumps(item, ensure_ascii=False) + "\n")
        print(f"wrote {path}")

    write_jsonl("dataset_20.jsonl", dataset_20)
    write_jsonl("dataset_50.jsonl", dataset_50)
    write_jsonl("dataset_demo.jsonl", demo)
    write_jsonl("corpus.jsonl", CORPUS)

    texts = []
    for conv in CONVERSATIONS:
        for turn in conv["turns"]:
            texts.extend([turn["q"], turn["refined"], turn["answer"], *turn["keywords"]])
    for doc in CORPUS:
        texts.extend([doc.get("title") or "", doc["body"], doc.get("snippet") or ""])
    (FIXTURES / "vectors.txt").write_text(make_vectors(texts), encoding="utf-8")
    print(f"wrote {FIXTURES / 'vectors.txt'}")

    refiner, keyword_rules, responder = scripted_rules(dataset_20)
    config = {
        "pipeline": {
            "max_documents": 5,
            "recall_top_k": 20,
            "rerank_top_n": 3,
            "ablations": [],
            "tokenizer_mode": "unicode",
            "score_function": "cosine",
        },
        "connector": {"kind": "offline", "corpus_path": "corpus.jsonl"},
        "scorer": {"kind": "lexical"},
        "embeddings": {"path": "vectors.txt"},
        "backends": {
            "refiner": {"kind": "scripted", "rules": refiner},
            "keyword_extractor": {"kind": "scripted", "rules": keyword_rules},
            "responder": {"kind": "scripted", "rules": responder},
        },
    }
    with open(FIXTURES / "config_scripted.json", "w", encoding="utf-8") as fh:
        json.dump(config, fh, ensure_ascii=False, indent=2)
    print(f"wrote {FIXTURES / 'config_scripted.json'}")


if __name__ == "__main__":
    main()
