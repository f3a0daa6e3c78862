"""Command-line front door.

Subcommands:
  stats   --dataset                       dataset statistics report
  answer  --dataset --out --config        batch-answer a dataset
  ablate  --drop qf,fr,sc --dataset --out --config
  eval    --pred --ref                    score predictions against references
  chat    --config                        interactive REPL over one session
  serve   --config --port                 run the HTTP service

Exit codes: 0 success, 1 usage error, 2 runtime error. The config file path
may also come from the CONVQA_CONFIG environment variable.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from pathlib import Path
from typing import Any, Sequence

from .config import build_pipeline, config_digest, load_config
from .dataset import dataset_stats, load_dataset, render_stats_report
from .errors import ConvQAError
from .harness import ablation_label
from .metrics import evaluate_run, render_metric_report
from .pipeline import Pipeline, read_predictions, write_predictions

USAGE_EXIT = 1
RUNTIME_EXIT = 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # argparse would exit(2); the contract is 1
        raise UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(
        prog="convqa",
        description="Conversation-level retrieval-augmented question answering.",
        epilog="Exit codes: 0 success, 1 usage error, 2 runtime error.",
        add_help=True,
    )
    sub = parser.add_subparsers(dest="command", required=True)

    stats = sub.add_parser("stats", help="dataset statistics")
    stats.add_argument("--dataset", required=True)
    stats.add_argument("--tokenizer", default="unicode", choices=["unicode", "whitespace"])
    stats.add_argument("--json", action="store_true", dest="as_json")

    answer = sub.add_parser("answer", help="batch-answer a dataset")
    answer.add_argument("--dataset", required=True)
    answer.add_argument("--out", required=True)
    answer.add_argument("--config")

    ablate = sub.add_parser("ablate", help="batch run with stages dropped")
    ablate.add_argument("--drop", required=True, help="comma-separated codes from qf,fr,sc")
    ablate.add_argument("--dataset", required=True)
    ablate.add_argument("--out", required=True)
    ablate.add_argument("--config")

    evaluate = sub.add_parser("eval", help="score predictions against references")
    evaluate.add_argument("--pred", required=True)
    evaluate.add_argument("--ref", required=True)
    evaluate.add_argument("--tokenizer", default="unicode", choices=["unicode", "whitespace"])
    evaluate.add_argument("--json", action="store_true", dest="as_json")

    chat = sub.add_parser("chat", help="interactive REPL")
    chat.add_argument("--config")
    chat.add_argument("--show-evidence", action="store_true")

    serve = sub.add_parser("serve", help="run the HTTP service")
    serve.add_argument("--config")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8080)
    serve.add_argument("--ui-dir")
    serve.add_argument("--snapshot", help="file for session persistence across restarts")

    return parser


def _require_config(args: argparse.Namespace) -> dict[str, Any]:
    path = args.config or os.environ.get("CONVQA_CONFIG")
    if not path:
        raise UsageError("a config file is required (--config or CONVQA_CONFIG)")
    return load_config(path)


def _cmd_stats(args: argparse.Namespace) -> int:
    records = load_dataset(args.dataset)
    stats = dataset_stats(records, tokenizer_mode=args.tokenizer)
    if args.as_json:
        print(json.dumps(stats.to_dict(), ensure_ascii=False))
    else:
        print(render_stats_report(stats))
    return 0


def _run_batch(pipeline: Pipeline, dataset_path: str, out_path: str) -> int:
    records = load_dataset(dataset_path)
    outcomes = pipeline.run_dataset(records)
    write_predictions(outcomes, out_path)
    failures = sum(1 for o in outcomes if o.error is not None)
    print(f"answered {len(outcomes) - failures}/{len(outcomes)} records -> {out_path}")
    return 0


def _cmd_answer(args: argparse.Namespace) -> int:
    return _run_batch(build_pipeline(_require_config(args)), args.dataset, args.out)


def _cmd_ablate(args: argparse.Namespace) -> int:
    codes = frozenset(code.strip().lower() for code in args.drop.split(",") if code.strip())
    unknown = codes - {"qf", "fr", "sc"}
    if unknown or not codes:
        raise UsageError(f"--drop takes codes from qf,fr,sc (got {args.drop!r})")
    config = _require_config(args)
    pipeline = build_pipeline(config)
    ablated = dataclasses.replace(pipeline.config, ablations=codes)
    pipeline.config = ablated
    print(f"configuration: {ablation_label(codes)}")
    return _run_batch(pipeline, args.dataset, args.out)


def _cmd_eval(args: argparse.Namespace) -> int:
    predictions = read_predictions(args.pred)
    candidates = [
        entry.get("result", {}).get("response", "") if "error" not in entry else ""
        for entry in predictions
    ]
    references = [record.reference_response for record in load_dataset(args.ref)]
    report = evaluate_run(candidates, references, tokenizer_mode=args.tokenizer)
    if args.as_json:
        print(json.dumps(report.to_dict(), ensure_ascii=False))
    else:
        print(render_metric_report(report))
    return 0


def _cmd_chat(args: argparse.Namespace) -> int:
    pipeline = build_pipeline(_require_config(args))
    session = pipeline.create_session()
    print(f"session {session.id} — type a question, /quit to exit")
    for line in sys.stdin:
        question = line.strip()
        if not question:
            continue
        if question in ("/quit", "/exit"):
            break
        try:
            result = pipeline.answer_turn(session, question)
        except ConvQAError as exc:
            print(f"error: {exc}")
            continue
        print(result.response)
        if args.show_evidence:
            print(f"  [refined] {result.refined_question.text}")
            print(f"  [keywords] {', '.join(result.keywords)}")
            for sp in result.top_paragraphs:
                print(f"  [{sp.final_rank}] {sp.paragraph.text[:80]}")
    return 0


def _cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .service import create_app

    config = _require_config(args)
    pipeline = build_pipeline(config)
    ui_dir = args.ui_dir or config.get("ui_dir")
    if ui_dir and not Path(ui_dir).is_absolute():
        ui_dir = str(Path(config.get("_base_dir", ".")) / ui_dir)
    app = create_app(
        pipeline,
        config_digest=config_digest(config),
        ui_dir=ui_dir,
        snapshot_path=args.snapshot or config.get("session_snapshot"),
    )
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


_COMMANDS = {
    "stats": _cmd_stats,
    "answer": _cmd_answer,
    "ablate": _cmd_ablate,
    "eval": _cmd_eval,
    "chat": _cmd_chat,
    "serve": _cmd_serve,
}


def main(argv: Sequence[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return USAGE_EXIT
    try:
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return USAGE_EXIT
    except (ConvQAError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return RUNTIME_EXIT


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
