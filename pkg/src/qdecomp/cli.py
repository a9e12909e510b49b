"""Command-line pipeline: generate, decompose, answer, predict, evaluate.

All file formats are JSONL (one record per line) so every stage streams.
Subcommands are idempotent: identical seeds and inputs produce
byte-identical outputs regardless of worker count.

Exit codes: 0 success, 2 usage (argparse), 3 I/O error, 4 schema error,
5 id mismatch between inputs.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import jsonl
from .baselines import (
    ConstantPredictor,
    OraclePredictor,
    fit_most_likely,
    fit_random,
    predict_records,
)
from .corpus import build_corpus, derive_gold
from .decompose import (
    QuestionDag,
    dag_from_dict,
    dag_to_dict,
    decompose,
    default_templates,
    load_templates,
)
from .metrics import (
    DEFAULT_RWR_MAX_N,
    evaluate_predictions,
    gold_from_records,
    ic_accuracy_correlation,
    predictions_from_records,
    report_csv_tables,
)
from .programs import (
    DEFAULT_BANNED_TYPES,
    ProgramError,
    default_vocabulary,
    load_vocabulary,
    parse_program,
    render_program,
)
from .propagation import audit_gold
from .scenegraph import (
    generate_scene_graphs,
    scene_graph_from_dict,
    scene_graph_to_dict,
)

EXIT_OK = 0
EXIT_IO = 3
EXIT_SCHEMA = 4
EXIT_ID_MISMATCH = 5


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def _load_vocab(path):
    path = path or os.environ.get("QDECOMP_VOCAB")
    if path is None:
        return default_vocabulary()
    return load_vocabulary(_existing(path))


def _load_templates(path):
    path = path or os.environ.get("QDECOMP_TEMPLATES")
    if path is None:
        return default_templates()
    return load_templates(_existing(path))


def _existing(path) -> Path:
    path = Path(path)
    if not path.exists():
        raise CliError(f"input file not found: {path}", EXIT_IO)
    return path


def _read_jsonl(path):
    try:
        return list(jsonl.read_jsonl(_existing(path)))
    except jsonl.SchemaError as exc:
        raise CliError(str(exc), EXIT_SCHEMA)


def _banned(args) -> frozenset:
    if getattr(args, "ban_list", None) is None:
        return DEFAULT_BANNED_TYPES
    return frozenset(t for t in args.ban_list.split(",") if t)


def _load_dags(path):
    dags = []
    for record in _read_jsonl(path):
        try:
            dags.append(dag_from_dict(record))
        except (KeyError, ProgramError) as exc:
            raise CliError(f"{path}: bad DAG record ({exc})", EXIT_SCHEMA)
    return dags


def _load_graphs(path):
    try:
        return [scene_graph_from_dict(r) for r in _read_jsonl(path)]
    except (KeyError, ValueError) as exc:
        if isinstance(exc, CliError):
            raise
        raise CliError(f"{path}: bad scene graph record ({exc})", EXIT_SCHEMA)


def cmd_gen(args) -> int:
    if args.videos < 1:
        raise CliError("--videos must be at least 1; an empty corpus is rejected", EXIT_IO)
    vocab = _load_vocab(args.vocab)
    templates = _load_templates(args.templates)
    annotations = None
    if args.negatives:
        from .propagation import load_negative_annotations

        try:
            loaded = load_negative_annotations(_existing(args.negatives), vocab)
        except (KeyError, ValueError) as exc:
            raise CliError(f"{args.negatives}: bad annotation record ({exc})", EXIT_SCHEMA)
        annotations = {ann.video_id: ann for ann in loaded}
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    graphs = generate_scene_graphs(
        seed=args.seed,
        num_videos=args.videos,
        frames=args.frames,
        density=args.density,
        vocab=vocab,
    )
    jsonl.write_jsonl(out / "scene_graphs.jsonl", (scene_graph_to_dict(g) for g in graphs))

    num_questions = 0
    num_dags = 0
    num_nodes = 0
    with (out / "questions.jsonl").open("w", encoding="utf-8", newline="\n") as qfh, (
        out / "dags.jsonl"
    ).open("w", encoding="utf-8", newline="\n") as dfh:
        for records, dags in build_corpus(
            graphs, vocab, templates, seed=args.seed, annotations=annotations
        ):
            for record in records:
                qfh.write(jsonl.dumps(record) + "\n")
                num_questions += 1
            for dag in dags:
                dfh.write(jsonl.dumps(dag_to_dict(dag)) + "\n")
                num_dags += 1
                num_nodes += len(dag.nodes)
    mean_nodes = num_nodes / num_dags if num_dags else 0.0
    print(
        f"gen: {len(graphs)} videos, {num_dags} dags, {num_questions} questions, "
        f"mean {mean_nodes:.2f} sub-questions per dag -> {out}"
    )
    return EXIT_OK


def cmd_decompose(args) -> int:
    vocab = _load_vocab(args.vocab)
    templates = _load_templates(args.templates)
    banned = _banned(args)
    dags_out = []
    questions = {}
    for record in _read_jsonl(args.programs):
        try:
            program = parse_program(record["program"], vocab)
        except (KeyError, ProgramError) as exc:
            raise CliError(f"bad program record ({exc})", EXIT_SCHEMA)
        dag = decompose(program, record["video_id"], templates, banned)
        dags_out.append(dag_to_dict(dag))
        for node in dag.nodes:
            questions.setdefault(
                node.id,
                {
                    "id": node.id,
                    "video_id": dag.video_id,
                    "program": render_program(node.program),
                    "question": node.question,
                    "qtype": node.qtype,
                },
            )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    jsonl.write_jsonl(out / "dags.jsonl", dags_out)
    jsonl.write_jsonl(out / "questions.jsonl", questions.values())
    print(f"decompose: {len(dags_out)} dags, {len(questions)} questions -> {out}")
    return EXIT_OK


def cmd_answer(args) -> int:
    dags = _load_dags(args.dags)
    graphs = {g.video_id: g for g in _load_graphs(args.scene_graphs)}
    records = {}
    for dag in dags:
        graph = graphs.get(dag.video_id)
        if graph is None:
            raise CliError(f"no scene graph for video {dag.video_id}", EXIT_ID_MISMATCH)
        gold = derive_gold(dag, graph)
        for node in dag.nodes:
            if node.id in records:
                continue
            entry = gold.get(node.id)
            records[node.id] = {
                "id": node.id,
                "video_id": dag.video_id,
                "program": render_program(node.program),
                "question": node.question,
                "qtype": node.qtype,
                "answer": entry.answer if entry else None,
                "answer_provenance": entry.provenance if entry else "unknown",
            }
    jsonl.write_jsonl(args.out, records.values())
    answered = sum(1 for r in records.values() if r["answer"] is not None)
    print(f"answer: {answered}/{len(records)} questions answered -> {args.out}")
    return EXIT_OK


def cmd_baseline(args) -> int:
    questions = _read_jsonl(args.questions)
    if args.kind == "oracle":
        if not args.scene_graphs:
            raise CliError("oracle baseline requires --scene-graphs", EXIT_IO)
        predictor = OraclePredictor(_load_graphs(args.scene_graphs))
    elif args.kind == "most-likely":
        train = _read_jsonl(args.train) if args.train else questions
        predictor = fit_most_likely(train)
    elif args.kind == "constant":
        predictor = ConstantPredictor(args.answer)
    elif args.kind == "random":
        if args.seed is None:
            raise CliError("random baseline requires --seed", EXIT_IO)
        train = _read_jsonl(args.train) if args.train else questions
        predictor = fit_random(train, seed=args.seed)
    else:  # pragma: no cover - argparse enforces choices
        raise CliError(f"unknown baseline {args.kind}", EXIT_IO)
    rows = predict_records(predictor, questions)
    jsonl.write_jsonl(args.out, rows)
    print(f"baseline {args.kind}: {len(rows)} predictions -> {args.out}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    dags = _load_dags(args.dags)
    gold = gold_from_records(_read_jsonl(args.gold))
    try:
        predictions = predictions_from_records(_read_jsonl(args.predictions))
    except KeyError as exc:
        raise CliError(f"{args.predictions}: prediction rows need id/answer ({exc})", EXIT_SCHEMA)
    report = evaluate_predictions(
        dags,
        gold,
        predictions,
        banned_types=_banned(args),
        rwr_max_n=args.rwr_max_n,
        workers=args.workers,
    )
    unknown = report["counts"]["unknown_prediction_ids"]
    if unknown:
        print(f"warning: {unknown} prediction ids match no question; excluded", file=sys.stderr)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    formats = {f for f in args.formats.split(",") if f}
    if "json" in formats:
        (out / "report.json").write_text(
            json.dumps(report, indent=2, ensure_ascii=False, sort_keys=False) + "\n",
            encoding="utf-8",
        )
    if "csv" in formats:
        for name, text in report_csv_tables(report, args.rwr_max_n).items():
            (out / name).write_text(text, encoding="utf-8")
    print(f"evaluate: {report['counts']['compositions']} compositions scored -> {out}")
    return EXIT_OK


def cmd_correlate(args) -> int:
    dags = _load_dags(args.dags)
    gold = gold_from_records(_read_jsonl(args.gold))
    predictions = predictions_from_records(_read_jsonl(args.predictions))
    result = ic_accuracy_correlation(dags, gold, predictions, _banned(args))
    lines = ["dag_root,video_id,ic,accuracy"]
    for p in result["points"]:
        lines.append(f"{p.dag_root},{p.video_id},{p.ic:.4f},{p.accuracy:.4f}")
    Path(args.out).write_text("\n".join(lines) + "\n", encoding="utf-8")
    if result["r"] is None:
        print(f"correlate: r undefined ({result['reason']}), {len(result['points'])} points")
    else:
        print(f"correlate: r = {result['r']:.4f} over {len(result['points'])} points")
    return EXIT_OK


def cmd_audit(args) -> int:
    dags = _load_dags(args.dags)
    gold_records = _read_jsonl(args.gold)
    answers = {}
    from .propagation import AnswerEntry

    for record in gold_records:
        if record.get("answer") is not None:
            answers[record["id"]] = AnswerEntry(
                answer=record["answer"],
                provenance=record.get("answer_provenance", "unknown"),
            )
    banned = _banned(args)
    violations = []
    for dag in dags:
        scoped = {n.id: answers[n.id] for n in dag.nodes if n.id in answers}
        violations.extend(audit_gold(dag, scoped, banned))
    if args.out:
        jsonl.write_jsonl(args.out, violations)
    print(f"audit: {len(violations)} violations over {len(dags)} dags")
    return EXIT_OK if not violations else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qdecomp",
        description="Question decomposition DAGs and compositional-consistency evaluation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--vocab", help="vocabulary JSON (default: built-in, or $QDECOMP_VOCAB)")
        p.add_argument("--templates", help="template JSON (default: built-in, or $QDECOMP_TEMPLATES)")
        p.add_argument("--ban-list", help="comma-separated banned question types")

    p = sub.add_parser("gen", help="generate scene graphs, questions and DAGs")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--videos", type=int, required=True)
    p.add_argument("--frames", type=int, default=30)
    p.add_argument("--density", type=float, default=0.7)
    p.add_argument("--out", required=True)
    common(p)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("decompose", help="decompose program records into DAGs")
    p.add_argument("--programs", required=True, help="JSONL with video_id and program fields")
    p.add_argument("--out", required=True)
    common(p)
    p.set_defaults(func=cmd_decompose)

    p = sub.add_parser("answer", help="derive gold answers for DAG questions")
    p.add_argument("--dags", required=True)
    p.add_argument("--scene-graphs", required=True)
    p.add_argument("--out", required=True)
    common(p)
    p.set_defaults(func=cmd_answer)

    p = sub.add_parser("baseline", help="write baseline predictions")
    p.add_argument("--kind", required=True, choices=["oracle", "most-likely", "constant", "random"])
    p.add_argument("--questions", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--train", help="training gold stream (defaults to --questions)")
    p.add_argument("--scene-graphs", help="required for the oracle baseline")
    p.add_argument("--answer", default="no", help="constant baseline answer")
    p.add_argument("--seed", type=int, help="random baseline seed")
    common(p)
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("evaluate", help="score predictions against gold DAGs")
    p.add_argument("--dags", required=True)
    p.add_argument("--gold", required=True)
    p.add_argument("--predictions", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--formats", default="json,csv")
    p.add_argument("--rwr-max-n", type=int, default=DEFAULT_RWR_MAX_N)
    p.add_argument("--workers", type=int, default=1)
    common(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("correlate", help="per-DAG consistency vs accuracy scatter")
    p.add_argument("--dags", required=True)
    p.add_argument("--gold", required=True)
    p.add_argument("--predictions", required=True)
    p.add_argument("--out", required=True)
    common(p)
    p.set_defaults(func=cmd_correlate)

    p = sub.add_parser("audit", help="check gold answers against the consistency rules")
    p.add_argument("--dags", required=True)
    p.add_argument("--gold", required=True)
    p.add_argument("--out", help="violation dump JSONL")
    common(p)
    p.set_defaults(func=cmd_audit)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
